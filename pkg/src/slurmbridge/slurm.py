"""Slurm operations over a transport Endpoint: environment provisioning,
submission, polling, log/result retrieval, cancellation, cleanup."""

import posixpath
import re
from dataclasses import dataclass, field
from enum import Enum

from . import config as config_mod
from . import jobscript
from .errors import (
    AccountingUnavailable,
    EmptyOutput,
    LogMissing,
    PullFailed,
    ScratchUnwritable,
    SubmitRejected,
    TransportError,
    UnknownState,
    UnparseableJobId,
)
from .states import JobState, aggregate_array_states, parse_state_token

_SUBMIT_RE = re.compile(r"Submitted batch job (\d+)")

MANAGED_DIRS = ("singularity_images", "slurm-scripts/jobs", "data", "logs")

DEFAULT_POLL_INTERVAL_S = 10


class JobKind(Enum):
    WORKFLOW = "workflow"
    CONVERSION_ARRAY = "conversion-array"


@dataclass(frozen=True)
class JobHandle:
    job_id: int
    kind: JobKind
    script_path: str
    logfile_path: str
    submitted_at: float
    array_size: int = None


@dataclass
class EnvReport:
    created_dirs: list = field(default_factory=list)
    pulled_images: list = field(default_factory=list)  # (workflow name, image path)
    placed_scripts: list = field(default_factory=list)
    refreshed: bool = False
    failures: list = field(default_factory=list)  # (workflow name, error message)


@dataclass
class WaitResult:
    states: dict  # job_id -> JobState
    deadline_exceeded: set = field(default_factory=set)  # job ids still non-terminal

    def all_terminal(self):
        return not self.deadline_exceeded


def scratch_layout(profile):
    return {name: posixpath.join(profile.scratch_dir, name) for name in MANAGED_DIRS}


def image_file_path(profile, name, version):
    return posixpath.join(
        profile.scratch_dir, "singularity_images", f"{name}_{version}.sif"
    )


def converter_image_path(profile, src_fmt, dst_fmt):
    return posixpath.join(
        profile.scratch_dir, "singularity_images", f"convert_{src_fmt}_to_{dst_fmt}.sif"
    )


def _registry_job_script(entry, resources, image_path, logs_dir):
    """The preinstalled per-workflow script: data paths arrive as submit-time
    environment variables."""
    if entry.job_script_source is config_mod.JobScriptSource.REPO_PROVIDED:
        body = [
            f"# job script provided by {entry.repo_url}@{entry.version}",
            f'singularity exec --bind "$IN_PATH:/data/in" --bind "$OUT_PATH:/data/out" '
            f'--bind "$GT_PATH:/data/gt" {image_path}',
        ]
    else:
        body = [
            f'singularity exec --bind "$IN_PATH:/data/in" --bind "$OUT_PATH:/data/out" '
            f'--bind "$GT_PATH:/data/gt" {image_path}'
        ]
    script = jobscript.JobScript(
        directives=[
            ("--mem", str(resources.mem_mb)),
            ("--cpus-per-task", str(resources.cpus)),
            ("--time", jobscript.minutes_to_clock(resources.time_limit_min)),
            ("--output", jobscript.logfile_pattern(logs_dir)),
        ]
        + ([("--gres", f"gpu:{resources.gpus}")] if resources.gpus > 0 else []),
        env_exports=[],
        body=body,
        logfile_path=jobscript.logfile_pattern(logs_dir),
    )
    return jobscript.render_script(script)


def init_environment(endpoint, profile, registry):
    """Provision the managed scratch layout and pull missing images.

    Idempotent: a second call with an unchanged registry creates nothing and
    pulls nothing.
    """
    layout = scratch_layout(profile)
    report = EnvReport()
    refreshed = True
    for path in layout.values():
        if not endpoint.path_exists(path):
            refreshed = False
        try:
            endpoint.make_dirs(path)
        except TransportError as exc:
            raise ScratchUnwritable(str(exc)) from exc
        report.created_dirs.append(path)
    report.refreshed = refreshed

    logs_dir = layout["logs"]
    for name in sorted(registry.entries):
        entry = registry.entry(name)
        resolved = config_mod.resolve_workflow(registry, name)
        image_path = image_file_path(profile, name, entry.version)
        try:
            if not endpoint.path_exists(image_path):
                result = endpoint.exec(
                    ["singularity", "pull", image_path, f"docker://{resolved.image_reference}"]
                )
                if not result.ok:
                    raise PullFailed(name, result.exit_code, result.stderr)
                report.pulled_images.append((name, image_path))
            script_path = posixpath.join(layout["slurm-scripts/jobs"], f"{name}.sh")
            text = _registry_job_script(entry, entry.resources, image_path, logs_dir)
            endpoint.put_bytes(text.encode(), script_path)
            report.placed_scripts.append(script_path)
        except (PullFailed, TransportError) as exc:
            # Partial failure: keep whatever provisioned, report per workflow.
            report.failures.append((name, str(exc)))
    for (src, dst), image in (profile.converters or {}).items():
        conv_path = converter_image_path(profile, src, dst)
        if not endpoint.path_exists(conv_path):
            result = endpoint.exec(["singularity", "pull", conv_path, f"docker://{image}"])
            if not result.ok:
                report.failures.append((f"converter {src}->{dst}", result.stderr))
                continue
            report.pulled_images.append((f"converter {src}->{dst}", conv_path))
    return report


def submit_job(endpoint, script_text, remote_script_path, env=(), kind=JobKind.WORKFLOW,
               array_size=None, logfile_pattern=None, now=0.0):
    """Upload a script and submit it, returning the parsed job handle."""
    endpoint.put_bytes(script_text.encode(), remote_script_path)
    command = ["env"] + [f"{name}={value}" for name, value in env] if env else []
    command += ["sbatch", remote_script_path]
    result = endpoint.exec(command)
    if not result.ok:
        raise SubmitRejected(result.stderr or result.stdout, result.exit_code)
    match = _SUBMIT_RE.search(result.stdout)
    if match is None:
        raise UnparseableJobId(f"no job id in submitter output: {result.stdout!r}")
    job_id = int(match.group(1))
    if logfile_pattern is None:
        logfile_pattern = ""
    return JobHandle(
        job_id=job_id,
        kind=kind,
        script_path=remote_script_path,
        logfile_path=logfile_pattern.replace("%j", str(job_id)),
        submitted_at=now,
        array_size=array_size,
    )


def poll_jobs(endpoint, handles):
    """One accounting round trip covering every handle; array parents are
    aggregated from their task states."""
    ids = ",".join(str(h.job_id) for h in handles)
    try:
        result = endpoint.exec(
            ["sacct", "-n", "-P", "-X", "-o", "JobID,State", "-j", ids]
        )
    except TransportError as exc:
        raise AccountingUnavailable(str(exc)) from exc
    if not result.ok:
        raise AccountingUnavailable(result.stderr)
    plain = {}
    tasks = {}
    for line in result.stdout.splitlines():
        if "|" not in line:
            continue
        entry_id, _, token = line.partition("|")
        state = parse_state_token(token)
        if state is None:
            raise UnknownState(token)
        if "_" in entry_id:
            parent, _, _ = entry_id.partition("_")
            tasks.setdefault(int(parent), []).append(state)
        else:
            plain[int(entry_id)] = state
    states = {}
    for handle in handles:
        if handle.job_id in tasks:
            states[handle.job_id] = aggregate_array_states(tasks[handle.job_id])
        elif handle.job_id in plain:
            states[handle.job_id] = plain[handle.job_id]
        else:
            # Submitted but not yet visible to accounting.
            states[handle.job_id] = JobState.PENDING
    return states


def wait_terminal(endpoint, handles, poll_interval_s=DEFAULT_POLL_INTERVAL_S,
                  deadline_s=None, on_poll=None):
    """Poll until every handle is terminal or the deadline passes.

    Up to 3 consecutive accounting failures are tolerated; jobs still
    non-terminal at the deadline are flagged in the result.
    """
    assert poll_interval_s > 0
    elapsed = 0.0
    failures = 0
    states = {}
    while True:
        try:
            states = poll_jobs(endpoint, handles)
            failures = 0
        except AccountingUnavailable:
            failures += 1
            if failures >= 3:
                raise
        if on_poll is not None and states:
            on_poll(states)
        if states and all(state.terminal for state in states.values()):
            return WaitResult(states=states)
        if deadline_s is not None and elapsed >= deadline_s:
            pending = {jid for jid, s in states.items() if not s.terminal}
            return WaitResult(states=states, deadline_exceeded=pending)
        endpoint.sleep(poll_interval_s)
        elapsed += poll_interval_s


def cancel_job(endpoint, handle):
    """Issue a cancel; cancelling an already-terminal job is a no-op."""
    endpoint.exec(["scancel", str(handle.job_id)])
    return True


def fetch_logfile(endpoint, handle, local_dir):
    """Copy the job's logfile(s) locally; returns the parent log path."""
    import os

    os.makedirs(local_dir, exist_ok=True)
    remote = handle.logfile_path
    local = os.path.join(local_dir, f"omero-job-{handle.job_id}.log")
    if not endpoint.path_exists(remote):
        raise LogMissing(remote)
    endpoint.get_file(remote, local)
    if handle.array_size:
        for task in range(handle.array_size):
            task_remote = remote.replace(
                f"omero-job-{handle.job_id}.log", f"omero-job-{handle.job_id}_{task}.log"
            )
            if endpoint.path_exists(task_remote):
                endpoint.get_file(
                    task_remote,
                    os.path.join(local_dir, f"omero-job-{handle.job_id}_{task}.log"),
                )
    return local


def fetch_results(endpoint, run_out_dir, local_zip_path):
    """Zip the remote out dir in place, transfer, and checksum-verify."""
    remote_zip = run_out_dir.rstrip("/") + ".zip"
    result = endpoint.exec(["zip", "-r", remote_zip, run_out_dir])
    if result.exit_code == 12:
        raise EmptyOutput(run_out_dir)
    if not result.ok:
        raise TransportError(f"remote zip failed: {result.stderr}")
    endpoint.get_file(remote_zip, local_zip_path)
    endpoint.exec(["rm", "-f", remote_zip])
    return local_zip_path


def cleanup_run(endpoint, run_paths):
    """Remove the run's remote data dirs; logs are retained. Idempotent."""
    removed = []
    for path in run_paths:
        if endpoint.path_exists(path):
            endpoint.remove_tree(path)
            removed.append(path)
    return removed
