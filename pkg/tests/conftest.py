import json
import os

import pytest

from slurmbridge import config as config_mod
from slurmbridge import descriptor as descriptor_mod
from slurmbridge.simslurm import SimCluster, SimEndpoint

CELLPOSE_DESCRIPTOR = {
    "name": "W_NucleiSegmentation-Cellpose",
    "schema-version": "cytomine-0.1",
    "container-image": {"image": "demo/w_nucleisegmentation-cellpose", "version": "v1.2.9"},
    "command-line": "python wrapper.py [DIAMETER]",
    "inputs": [
        {
            "id": "diameter",
            "name": "Diameter",
            "description": "Cell diameter in pixels",
            "type": "Number",
            "default-value": 30,
            "command-line-flag": "--diameter",
            "optional": True,
        }
    ],
}

SAMPLE_CONFIG = """\
[ssh]
host = hpc.example.org
user = omero
key_path = /etc/keys/id_ed25519
port = 22

[cluster]
scratch_dir = /scratch/omero

[registry]
namespace = demo

[defaults]
mem_mb = 4096
cpus = 2
gpus = 0
time_limit_min = 60

[converters]
zarr_to_tiff = demo/converter-zarr-tiff:v1.0.0

[workflow.cellpose]
repo_url = https://github.com/demo/W_NucleiSegmentation-Cellpose
version = v1.2.9
"""


@pytest.fixture
def cellpose_descriptor_text():
    return json.dumps(CELLPOSE_DESCRIPTOR)


@pytest.fixture
def cellpose_descriptor(cellpose_descriptor_text):
    return descriptor_mod.parse_descriptor(cellpose_descriptor_text)


@pytest.fixture
def sample_profile_registry():
    return config_mod.parse_config(SAMPLE_CONFIG)


@pytest.fixture
def sim_endpoint():
    return SimEndpoint(SimCluster())


def make_tiff_inputs(directory, count, prefix="img"):
    """Synthetic 2D TIFF files with distinct content."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for index in range(count):
        path = os.path.join(directory, f"{prefix}{index:02d}.tiff")
        with open(path, "wb") as handle:
            handle.write(b"II*\x00" + f"synthetic tiff {index}".encode())
        paths.append(path)
    return paths


def make_zarr_inputs(directory, count, prefix="vol", chunks=3):
    """Synthetic ZARR stores: one directory tree per item."""
    paths = []
    for index in range(count):
        root = os.path.join(directory, f"{prefix}{index:02d}.zarr")
        os.makedirs(os.path.join(root, "0"), exist_ok=True)
        with open(os.path.join(root, ".zattrs"), "w") as handle:
            handle.write("{}")
        for chunk in range(chunks):
            with open(os.path.join(root, "0", f"{chunk}"), "wb") as handle:
                handle.write(f"chunk {index}/{chunk}".encode())
        paths.append(root)
    return paths
