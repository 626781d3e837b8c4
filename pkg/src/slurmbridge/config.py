"""Cluster configuration: endpoint settings, scratch layout, workflow registry.

The config is an INI document with sections [ssh], [cluster], [registry],
[defaults], [converters], and one [workflow.<name>] section per registered
workflow.
"""

import configparser
import posixpath
from dataclasses import dataclass
from enum import Enum

from .errors import InvalidValue, MalformedConfig, MissingSection, UnknownWorkflow

# Fallback resources applied beneath [defaults] and per-workflow overrides.
FALLBACK_MEM_MB = 4096
FALLBACK_CPUS = 2
FALLBACK_GPUS = 0
FALLBACK_TIME_MIN = 60


class JobScriptSource(Enum):
    GENERATED = "generated"
    REPO_PROVIDED = "repo"


@dataclass(frozen=True)
class ResourceSpec:
    mem_mb: int
    cpus: int
    gpus: int
    time_limit_min: int

    def __post_init__(self):
        if self.mem_mb <= 0:
            raise InvalidValue("mem_mb", "must be > 0")
        if self.cpus <= 0:
            raise InvalidValue("cpus", "must be > 0")
        if self.gpus < 0:
            raise InvalidValue("gpus", "must be >= 0")
        if self.time_limit_min <= 0:
            raise InvalidValue("time_limit_min", "must be > 0")


@dataclass(frozen=True)
class ClusterProfile:
    host: str
    user: str
    key_path: str
    scratch_dir: str
    port: int = 22
    partition: str = None
    account: str = None
    converters: dict = None  # (src_fmt, dst_fmt) -> image reference


@dataclass(frozen=True)
class WorkflowEntry:
    name: str
    repo_url: str
    version: str
    resources: ResourceSpec
    job_script_source: JobScriptSource = JobScriptSource.GENERATED
    image_override: str = None


@dataclass(frozen=True)
class WorkflowRegistry:
    entries: dict  # name -> WorkflowEntry
    namespace: str = "local"

    def names(self):
        return list(self.entries)

    def entry(self, name):
        if name not in self.entries:
            raise UnknownWorkflow(name)
        return self.entries[name]


@dataclass(frozen=True)
class ResolvedWorkflow:
    repo_url: str
    version: str
    image_reference: str
    reproducible: bool


_RESOURCE_KEYS = ("mem_mb", "cpus", "gpus", "time_limit_min")


def _int_value(section, key, raw):
    try:
        return int(raw)
    except ValueError:
        raise InvalidValue(f"{section}.{key}", f"expected an integer, got {raw!r}")


def parse_config(text):
    """Parse the INI document into (ClusterProfile, WorkflowRegistry)."""
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    try:
        parser.read_string(text)
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise MalformedConfig(str(exc), lineno=lineno) from exc
    except configparser.Error as exc:
        raise MalformedConfig(str(exc)) from exc

    for required in ("ssh", "cluster"):
        if required not in parser:
            raise MissingSection(required)

    ssh = parser["ssh"]
    host = ssh.get("host", "")
    user = ssh.get("user", "")
    if not host:
        raise InvalidValue("ssh.host", "must be non-empty")
    if not user:
        raise InvalidValue("ssh.user", "must be non-empty")
    port = _int_value("ssh", "port", ssh.get("port", "22"))

    cluster = parser["cluster"]
    scratch_dir = cluster.get("scratch_dir", "")
    if not posixpath.isabs(scratch_dir):
        raise InvalidValue("cluster.scratch_dir", "must be an absolute remote path")

    converters = {}
    if "converters" in parser:
        for key, image in parser["converters"].items():
            if "_to_" not in key:
                raise InvalidValue(f"converters.{key}", "key must be <src>_to_<dst>")
            if not image:
                raise InvalidValue(f"converters.{key}", "image reference must be non-empty")
            src, dst = key.split("_to_", 1)
            converters[(src, dst)] = image

    profile = ClusterProfile(
        host=host,
        user=user,
        key_path=ssh.get("key_path", ""),
        scratch_dir=scratch_dir.rstrip("/") or "/",
        port=port,
        partition=cluster.get("partition") or None,
        account=cluster.get("account") or None,
        converters=converters,
    )

    defaults = {
        "mem_mb": FALLBACK_MEM_MB,
        "cpus": FALLBACK_CPUS,
        "gpus": FALLBACK_GPUS,
        "time_limit_min": FALLBACK_TIME_MIN,
    }
    if "defaults" in parser:
        for key in _RESOURCE_KEYS:
            if key in parser["defaults"]:
                defaults[key] = _int_value("defaults", key, parser["defaults"][key])

    entries = {}
    for section in parser.sections():
        if not section.startswith("workflow."):
            continue
        name = section[len("workflow."):]
        wf = parser[section]
        repo_url = wf.get("repo_url", "")
        if "://" not in repo_url:
            raise InvalidValue(f"{section}.repo_url", "must be a URL")
        version = wf.get("version", "")
        if not version:
            raise InvalidValue(f"{section}.version", "must be non-empty")
        merged = dict(defaults)
        for key in _RESOURCE_KEYS:
            if key in wf:
                merged[key] = _int_value(section, key, wf[key])
        source_token = wf.get("job_script_source", "generated")
        try:
            source = JobScriptSource(source_token)
        except ValueError:
            raise InvalidValue(
                f"{section}.job_script_source", "must be 'generated' or 'repo'"
            )
        entries[name] = WorkflowEntry(
            name=name,
            repo_url=repo_url,
            version=version,
            resources=ResourceSpec(**merged),
            job_script_source=source,
            image_override=wf.get("image") or None,
        )

    namespace = "local"
    if "registry" in parser:
        namespace = parser["registry"].get("namespace", namespace)

    return profile, WorkflowRegistry(entries=entries, namespace=namespace)


def effective_resources(registry, name):
    """Fully resolved resources for a registered workflow."""
    return registry.entry(name).resources


def repo_basename(repo_url):
    base = repo_url.rstrip("/").rsplit("/", 1)[-1]
    if base.endswith(".git"):
        base = base[: -len(".git")]
    return base


def resolve_workflow(registry, name):
    """Derive the workflow's container image reference from its repo entry."""
    entry = registry.entry(name)
    if entry.image_override:
        image = entry.image_override
    else:
        image = f"{registry.namespace}/{repo_basename(entry.repo_url).lower()}:{entry.version}"
    return ResolvedWorkflow(
        repo_url=entry.repo_url,
        version=entry.version,
        image_reference=image,
        reproducible=entry.version != "latest",
    )
