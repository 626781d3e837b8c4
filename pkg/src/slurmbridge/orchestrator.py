"""End-to-end workflow runs: pack inputs, transfer, schedule conversion and
workflow jobs per batch, await completion, retrieve results, clean up."""

import datetime
import os
import posixpath
import shutil
import tempfile
import threading
import uuid
import zipfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

from . import config as config_mod
from . import descriptor as descriptor_mod
from . import jobscript, slurm
from .errors import (
    CollisionError,
    ConversionFailed,
    DuplicateId,
    EmptyOutput,
    InvalidBatchSize,
    MissingInput,
    NoResults,
    RetrievalFailed,
    SlurmBridgeError,
    TransferFailed,
    TransportError,
    UnknownConverter,
    WorkflowFailed,
)
from .states import JobState


class InputFormat(Enum):
    ZARR = "zarr"
    TIFF_2D = "tiff"
    OME_TIFF = "ome-tiff"


class RunStage(Enum):
    PREPARING = "Preparing"
    TRANSFERRING = "Transferring"
    QUEUED = "Queued"
    RUNNING = "Running"
    RETRIEVING = "Retrieving"
    DONE = "Done"
    FAILED = "Failed"
    PARTIAL_FAILURE = "PartialFailure"


TERMINAL_STAGES = {RunStage.DONE, RunStage.FAILED, RunStage.PARTIAL_FAILURE}

_STAGE_ORDER = [
    RunStage.PREPARING,
    RunStage.TRANSFERRING,
    RunStage.QUEUED,
    RunStage.RUNNING,
    RunStage.RETRIEVING,
]


@dataclass(frozen=True)
class InputItem:
    id: str
    local_path: str
    format: InputFormat

    @property
    def ext(self):
        return {
            InputFormat.ZARR: "zarr",
            InputFormat.TIFF_2D: "tiff",
            InputFormat.OME_TIFF: "ome.tiff",
        }[self.format]


@dataclass(frozen=True)
class BatchPlan:
    batch_size: int
    batches: list  # list of item-id lists


@dataclass
class BatchRun:
    index: int
    items: list  # item ids
    remote_dir: str = ""
    conversion_handle: object = None
    workflow_handle: object = None
    state: JobState = None
    result_zip: str = None
    logfile: str = None


@dataclass
class RunOptions:
    skip_conversion: bool = False
    output_mode: str = "SingleZip"
    parallelism: int = 4
    poll_interval_s: float = slurm.DEFAULT_POLL_INTERVAL_S
    deadline_s: float = None
    sim_duration_s: int = 30
    journal_dir: str = None


@dataclass
class RunRecord:
    run_id: str
    workflow: str
    version: str
    values: dict
    items: list  # InputItem list
    batches: list = field(default_factory=list)
    overall_state: RunStage = RunStage.PREPARING
    started_at: str = None
    finished_at: str = None
    output_artifacts: list = field(default_factory=list)
    stage_history: list = field(default_factory=list)  # (timestamp, stage, detail)


def detect_format(path):
    name = os.path.basename(path).lower()
    if name.endswith(".zarr") and os.path.isdir(path):
        return InputFormat.ZARR
    if name.endswith(".ome.tiff") or name.endswith(".ome.tif"):
        return InputFormat.OME_TIFF
    if name.endswith(".tiff") or name.endswith(".tif"):
        return InputFormat.TIFF_2D
    return None


def scan_input_dir(directory):
    """Build InputItems from every recognised entry in a local directory."""
    items = []
    for name in sorted(os.listdir(directory)):
        path = os.path.join(directory, name)
        fmt = detect_format(path)
        if fmt is None:
            continue
        item_id = name
        for suffix in (".ome.tiff", ".ome.tif", ".tiff", ".tif", ".zarr"):
            if item_id.lower().endswith(suffix):
                item_id = item_id[: -len(suffix)]
                break
        items.append(InputItem(id=item_id, local_path=path, format=fmt))
    return items


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def pack_inputs(items, staging_dir):
    """Zip every item under in/<id>.<ext>, sorted by id; ZARR items are
    stored as their full directory trees."""
    if not items:
        raise MissingInput("no input items")
    seen = set()
    for item in items:
        if item.id in seen:
            raise DuplicateId(item.id)
        seen.add(item.id)
        if not os.path.exists(item.local_path):
            raise MissingInput(item.local_path)
    os.makedirs(staging_dir, exist_ok=True)
    zip_path = os.path.join(staging_dir, "input.zip")
    with zipfile.ZipFile(zip_path, "w", zipfile.ZIP_DEFLATED) as archive:
        for item in sorted(items, key=lambda i: i.id):
            arcbase = f"in/{item.id}.{item.ext}"
            if os.path.isdir(item.local_path):
                for root, _, files in os.walk(item.local_path):
                    for name in sorted(files):
                        full = os.path.join(root, name)
                        rel = os.path.relpath(full, item.local_path)
                        archive.write(full, f"{arcbase}/{rel}")
            else:
                archive.write(item.local_path, arcbase)
    return zip_path


def plan_batches(items, batch_size):
    if batch_size <= 0:
        raise InvalidBatchSize(f"batch size must be positive, got {batch_size}")
    ids = [item.id for item in items]
    batches = [ids[i:i + batch_size] for i in range(0, len(ids), batch_size)]
    return BatchPlan(batch_size=batch_size, batches=batches)


class _Journal:
    """Serialized sink for stage transitions, optionally mirrored to a
    plain-text journal file and a listener callback."""

    def __init__(self, record, journal_dir=None, listener=None):
        self.record = record
        self.listener = listener
        self.lock = threading.Lock()
        self.path = None
        if journal_dir is not None:
            os.makedirs(journal_dir, exist_ok=True)
            self.path = os.path.join(journal_dir, f"{record.run_id}.journal")

    def emit(self, stage, detail=""):
        with self.lock:
            timestamp = _now()
            if isinstance(stage, RunStage):
                self.record.overall_state = stage
            self.record.stage_history.append((timestamp, _stage_name(stage), detail))
            if self.path is not None:
                with open(self.path, "a") as handle:
                    handle.write(f"{timestamp}\t{_stage_name(stage)}\t{detail}\n")
            if self.listener is not None:
                self.listener(_stage_name(stage), detail)


def _stage_name(stage):
    return stage.value if isinstance(stage, RunStage) else str(stage)


def _run_layout(profile, run_id, batch_index, single_batch):
    base = posixpath.join(profile.scratch_dir, "data", run_id)
    if not single_batch:
        base = posixpath.join(base, f"batch{batch_index}")
    return {
        "base": base,
        "in": posixpath.join(base, "in"),
        "out": posixpath.join(base, "out"),
        "gt": posixpath.join(base, "gt"),
    }


def run_workflow(endpoint, profile, registry, workflow_descriptor, workflow_name,
                 values, items, options=None, local_output_dir=None, listener=None):
    """Single-batch execution: every item in one workflow job."""
    batch_size = max(len(items), 1)
    return run_workflow_batched(
        endpoint, profile, registry, workflow_descriptor, workflow_name,
        values, items, batch_size, options=options,
        local_output_dir=local_output_dir, listener=listener,
    )


def run_workflow_batched(endpoint, profile, registry, workflow_descriptor,
                         workflow_name, values, items, batch_size, options=None,
                         local_output_dir=None, listener=None):
    """Batched execution: pack, transfer, convert if needed, run, retrieve.

    Batches fail independently; a mix of completed and failed batches yields
    PartialFailure. Remote run data is always cleaned up; logs are retained.
    """
    options = options or RunOptions()
    values = descriptor_mod.validate_values(workflow_descriptor, values)
    entry = registry.entry(workflow_name)
    resources = config_mod.effective_resources(registry, workflow_name)
    run_id = str(uuid.uuid4())
    record = RunRecord(
        run_id=run_id,
        workflow=workflow_name,
        version=entry.version,
        values=values,
        items=list(items),
        started_at=_now(),
    )
    journal = _Journal(record, journal_dir=options.journal_dir, listener=listener)
    journal.emit(RunStage.PREPARING, f"workflow={workflow_name} items={len(items)}")

    if not items:
        record.finished_at = _now()
        journal.emit(RunStage.DONE, "no input items")
        return record

    plan = plan_batches(items, batch_size)
    by_id = {item.id: item for item in items}
    single_batch = len(plan.batches) == 1
    batches = []
    for index, ids in enumerate(plan.batches):
        layout = _run_layout(profile, run_id, index, single_batch)
        batches.append(BatchRun(index=index, items=ids, remote_dir=layout["base"]))
    record.batches = batches

    local_output_dir = local_output_dir or os.getcwd()
    os.makedirs(local_output_dir, exist_ok=True)
    staging_root = tempfile.mkdtemp(prefix=f"slurmbridge-{run_id}-")
    logs_dir = posixpath.join(profile.scratch_dir, "logs")
    image_path = slurm.image_file_path(profile, workflow_name, entry.version)
    limit = max(1, options.parallelism)
    endpoint_lock = threading.Lock()

    class BatchError(Exception):
        def __init__(self, cause):
            self.cause = cause

    def locked(func, *args, **kwargs):
        with endpoint_lock:
            return func(*args, **kwargs)

    def parallel(worker):
        errors = {}
        with ThreadPoolExecutor(max_workers=limit) as pool:
            futures = {pool.submit(worker, batch): batch for batch in batches}
            for future, batch in futures.items():
                try:
                    future.result()
                except SlurmBridgeError as exc:
                    errors[batch.index] = exc
                    batch.state = JobState.FAILED
        return errors

    failures = {}
    try:
        # Stage: pack all batches locally.
        zips = {}

        def pack(batch):
            batch_items = [by_id[i] for i in batch.items]
            staging = os.path.join(staging_root, f"batch{batch.index}")
            zips[batch.index] = pack_inputs(batch_items, staging)

        failures.update(parallel(pack))

        # Stage: transfer and unpack every batch.
        journal.emit(RunStage.TRANSFERRING, f"batches={len(batches)}")

        def transfer(batch):
            if batch.index in failures:
                return
            layout = _run_layout(profile, run_id, batch.index, single_batch)
            try:
                for key in ("in", "out", "gt"):
                    locked(endpoint.make_dirs, layout[key])
                remote_zip = posixpath.join(layout["base"], "input.zip")
                locked(endpoint.put_file, zips[batch.index], remote_zip)
                result = locked(endpoint.exec, ["unzip", remote_zip, "-d", layout["base"]])
                if not result.ok:
                    raise TransferFailed(f"remote unpack failed: {result.stderr}")
                locked(endpoint.exec, ["rm", "-f", remote_zip])
            except TransportError as exc:
                raise TransferFailed(str(exc)) from exc

        failures.update(parallel(transfer))

        # Stage: submit conversion arrays (where needed) or workflow jobs.
        journal.emit(RunStage.QUEUED, "submitting jobs")

        def needs_conversion(batch):
            if options.skip_conversion:
                return []
            return [i for i in batch.items if by_id[i].format is InputFormat.ZARR]

        def submit_workflow_job(batch):
            layout = _run_layout(profile, run_id, batch.index, single_batch)
            script = jobscript.generate_workflow_script(
                workflow_descriptor,
                resources,
                values,
                jobscript.RunPaths(
                    in_dir=layout["in"],
                    out_dir=layout["out"],
                    gt_dir=layout["gt"],
                    image_file=image_path,
                ),
                logs_dir,
                sim=jobscript.SimAnnotation(
                    duration_s=options.sim_duration_s, outputs=len(batch.items)
                ),
            )
            script_path = posixpath.join(layout["base"], "job.sh")
            batch.workflow_handle = locked(
                slurm.submit_job,
                endpoint,
                jobscript.render_script(script),
                script_path,
                kind=slurm.JobKind.WORKFLOW,
                logfile_pattern=script.logfile_path,
            )
            journal.emit(
                "submit",
                f"batch={batch.index} kind=workflow job_id={batch.workflow_handle.job_id}",
            )

        def submit_first_job(batch):
            if batch.index in failures:
                return
            zarr_items = needs_conversion(batch)
            if zarr_items:
                layout = _run_layout(profile, run_id, batch.index, single_batch)
                converter = (profile.converters or {}).get(("zarr", "tiff"))
                if converter is None:
                    raise ConversionFailed(str(UnknownConverter("zarr", "tiff")))
                conv_image = slurm.converter_image_path(profile, "zarr", "tiff")
                script = jobscript.generate_conversion_script(
                    len(zarr_items),
                    conv_image,
                    "zarr",
                    "tiff",
                    layout["in"],
                    config_mod.ResourceSpec(
                        mem_mb=resources.mem_mb,
                        cpus=resources.cpus,
                        gpus=0,
                        time_limit_min=resources.time_limit_min,
                    ),
                    logs_dir,
                    sim=jobscript.SimAnnotation(duration_s=5, outputs=0),
                )
                script_path = posixpath.join(layout["base"], "convert.sh")
                batch.conversion_handle = locked(
                    slurm.submit_job,
                    endpoint,
                    jobscript.render_script(script),
                    script_path,
                    kind=slurm.JobKind.CONVERSION_ARRAY,
                    array_size=len(zarr_items),
                    logfile_pattern=script.logfile_path,
                )
                journal.emit(
                    "submit",
                    f"batch={batch.index} kind=conversion "
                    f"job_id={batch.conversion_handle.job_id} tasks={len(zarr_items)}",
                )
            else:
                submit_workflow_job(batch)

        failures.update(parallel(submit_first_job))

        # Stage: one consolidated poll loop over all outstanding handles.
        journal.emit(RunStage.RUNNING, "polling")
        elapsed = 0.0
        while True:
            outstanding = {}
            for batch in batches:
                if batch.index in failures:
                    continue
                if batch.conversion_handle is not None and batch.workflow_handle is None:
                    outstanding[batch.conversion_handle.job_id] = batch
                elif batch.workflow_handle is not None and (
                    batch.state is None or not batch.state.terminal
                ):
                    outstanding[batch.workflow_handle.job_id] = batch
            if not outstanding:
                break
            handles = [
                batch.conversion_handle
                if batch.workflow_handle is None
                else batch.workflow_handle
                for batch in outstanding.values()
            ]
            states = slurm.poll_jobs(endpoint, handles)
            progressed = False
            for job_id, state in states.items():
                batch = outstanding[job_id]
                if batch.workflow_handle is None:
                    if state is JobState.COMPLETED:
                        submit_workflow_job(batch)
                        progressed = True
                    elif state.terminal:
                        failures[batch.index] = ConversionFailed(
                            f"conversion job {job_id} ended {state.value}"
                        )
                        batch.state = JobState.FAILED
                        progressed = True
                else:
                    if state.terminal:
                        batch.state = state
                        journal.emit(
                            "batch-terminal", f"batch={batch.index} state={state.value}"
                        )
                        progressed = True
            if progressed:
                continue
            if options.deadline_s is not None and elapsed >= options.deadline_s:
                for batch in outstanding.values():
                    failures.setdefault(
                        batch.index,
                        WorkflowFailed(f"deadline exceeded after {elapsed}s"),
                    )
                break
            endpoint.sleep(options.poll_interval_s)
            elapsed += options.poll_interval_s

        # Stage: retrieve results or logs per batch.
        journal.emit(RunStage.RETRIEVING, "fetching artifacts")
        for batch in batches:
            layout = _run_layout(profile, run_id, batch.index, single_batch)
            handle = batch.workflow_handle
            if handle is not None:
                try:
                    log_path = slurm.fetch_logfile(endpoint, handle, local_output_dir)
                    batch.logfile = log_path
                except SlurmBridgeError:
                    pass
            if batch.index in failures or batch.state is not JobState.COMPLETED:
                if batch.index not in failures:
                    failures[batch.index] = WorkflowFailed(
                        f"workflow job ended {batch.state.value if batch.state else 'unknown'}",
                        logfile=batch.logfile,
                    )
                if batch.logfile:
                    record.output_artifacts.append(batch.logfile)
                continue
            zip_name = f"{run_id}_batch{batch.index}.zip"
            local_zip = os.path.join(local_output_dir, zip_name)
            try:
                slurm.fetch_results(endpoint, layout["out"], local_zip)
            except EmptyOutput as exc:
                failures[batch.index] = RetrievalFailed(str(exc), logfile=batch.logfile)
                continue
            except TransportError as exc:
                failures[batch.index] = RetrievalFailed(str(exc), logfile=batch.logfile)
                continue
            batch.result_zip = local_zip
            record.output_artifacts.append(local_zip)
    finally:
        # Cleanup is unconditional: remote run data goes, logs stay.
        try:
            removed = slurm.cleanup_run(
                endpoint,
                [posixpath.join(profile.scratch_dir, "data", run_id)],
            )
            journal.emit("cleanup", f"removed={len(removed)}")
        except TransportError:
            journal.emit("cleanup", "failed")
        shutil.rmtree(staging_root, ignore_errors=True)

    completed = [b for b in batches if b.state is JobState.COMPLETED and b.result_zip]
    record.finished_at = _now()
    if len(completed) == len(batches):
        journal.emit(RunStage.DONE, f"batches={len(batches)}")
    elif completed:
        journal.emit(RunStage.PARTIAL_FAILURE,
                     f"completed={len(completed)} failed={len(batches) - len(completed)}")
    else:
        detail = "; ".join(str(exc) for exc in failures.values()) or "no batch completed"
        journal.emit(RunStage.FAILED, detail)
    return record


def record_signature(record):
    """Structure of a RunRecord with run ids, job ids, and timestamps
    normalized away, for equivalence comparisons."""

    def scrub(text):
        return str(text).replace(record.run_id, "<run>")

    return {
        "workflow": record.workflow,
        "version": record.version,
        "values": record.values,
        "state": record.overall_state.value,
        "items": [item.id for item in record.items],
        "batches": [
            {
                "index": b.index,
                "items": list(b.items),
                "remote_dir": scrub(b.remote_dir),
                "state": b.state.value if b.state else None,
                "result_zip": scrub(os.path.basename(b.result_zip)) if b.result_zip else None,
            }
            for b in record.batches
        ],
        "artifacts": sorted(scrub(os.path.basename(p)) for p in record.output_artifacts),
    }


def import_results(record, destination, mode):
    """Place run outputs locally: unpacked images, sidecar files next to the
    inputs they derive from, or the raw zips."""
    zips = [b.result_zip for b in record.batches if b.result_zip]
    if not zips:
        raise NoResults(record.run_id)
    os.makedirs(destination, exist_ok=True)
    written = []

    def place(data, target):
        if os.path.exists(target):
            raise CollisionError(target)
        os.makedirs(os.path.dirname(target), exist_ok=True)
        with open(target, "wb") as handle:
            handle.write(data)
        written.append(target)

    if mode == "SingleZip":
        for zip_path in zips:
            target = os.path.join(destination, os.path.basename(zip_path))
            if os.path.exists(target):
                raise CollisionError(target)
            shutil.copyfile(zip_path, target)
            written.append(target)
        return written

    run_dir = os.path.join(destination, record.run_id)
    if mode == "ImagesFolder":
        for zip_path in zips:
            with zipfile.ZipFile(zip_path) as archive:
                for info in archive.infolist():
                    if info.is_dir():
                        continue
                    place(archive.read(info), os.path.join(run_dir, info.filename))
        return written

    if mode == "SidecarAttachments":
        stems = sorted(
            ((item.id, item) for item in record.items),
            key=lambda pair: -len(pair[0]),
        )
        for zip_path in zips:
            with zipfile.ZipFile(zip_path) as archive:
                for info in archive.infolist():
                    if info.is_dir():
                        continue
                    name = os.path.basename(info.filename)
                    stem = name.rsplit(".", 1)[0]
                    match = None
                    for item_id, item in stems:
                        if stem == item_id or stem.startswith(item_id + "_") \
                                or stem.startswith(item_id + "."):
                            match = item
                            break
                    if match is not None:
                        target = os.path.join(os.path.dirname(match.local_path), name)
                    else:
                        target = os.path.join(run_dir, "unmatched", name)
                    place(archive.read(info), target)
        return written

    raise ValueError(f"unknown import mode: {mode}")
