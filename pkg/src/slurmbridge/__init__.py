"""Containerized image-analysis workflows on Slurm, with an embedded
deterministic cluster simulator for desk-scale testing."""

__version__ = "0.1.0"

from .config import ClusterProfile, ResourceSpec, WorkflowRegistry, parse_config
from .descriptor import WorkflowDescriptor, parse_descriptor
from .simslurm import SimCluster, SimEndpoint
from .states import JobState
from .transport import Endpoint, SshEndpoint

__all__ = [
    "ClusterProfile",
    "Endpoint",
    "JobState",
    "ResourceSpec",
    "SimCluster",
    "SimEndpoint",
    "SshEndpoint",
    "WorkflowDescriptor",
    "WorkflowRegistry",
    "parse_config",
    "parse_descriptor",
]
