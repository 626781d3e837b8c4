"""Deterministic discrete-event Slurm cluster simulation.

The simulator answers the exact sbatch/sacct/scancel command grammar the
client speaks, schedules parsed scripts FIFO/first-fit onto configured
nodes, and advances a virtual clock. Script "work" is declared via a
``#SIM duration=<s> outputs=<n>`` annotation instead of being executed.
"""

import io
import json
import posixpath
import threading
import zipfile
from base64 import b64decode, b64encode
from dataclasses import dataclass, field

from .errors import ChecksumMismatch, DestinationUnwritable, SourceMissing, Timeout
from .jobscript import (
    clock_to_minutes,
    scan_directives,
    scan_env_exports,
    scan_sim_annotation,
)
from .states import JobState, aggregate_array_states
from .transport import (
    DEFAULT_DEADLINE_S,
    Endpoint,
    ExecResult,
    TransferReport,
    file_sha256,
    sha256_hex,
)

DEFAULT_NODES = [
    {"cpus": 4, "gpus": 1, "mem_mb": 16384},
    {"cpus": 4, "gpus": 1, "mem_mb": 16384},
]

# A fixed archive timestamp keeps zip output byte-deterministic.
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)

_DEFAULT_DURATION_S = 10


def _norm(path):
    return posixpath.normpath(path)


class SimFS:
    """In-memory POSIX-path filesystem: explicit directories, byte files."""

    def __init__(self):
        self.dirs = {"/"}
        self.files = {}

    def make_dirs(self, path):
        path = _norm(path)
        while path not in self.dirs:
            self.dirs.add(path)
            path = posixpath.dirname(path)

    def exists(self, path):
        path = _norm(path)
        return path in self.dirs or path in self.files

    def is_dir(self, path):
        return _norm(path) in self.dirs

    def write(self, path, data):
        path = _norm(path)
        parent = posixpath.dirname(path)
        if parent not in self.dirs:
            raise DestinationUnwritable(f"no such directory: {parent}")
        self.files[path] = bytes(data)

    def read(self, path):
        path = _norm(path)
        if path not in self.files:
            raise SourceMissing(path)
        return self.files[path]

    def remove_tree(self, path):
        path = _norm(path)
        removed = []
        prefix = path + "/"
        for name in list(self.files):
            if name == path or name.startswith(prefix):
                del self.files[name]
                removed.append(name)
        for name in list(self.dirs):
            if name == path or name.startswith(prefix):
                self.dirs.discard(name)
                removed.append(name)
        return removed

    def files_under(self, directory):
        """Sorted relative paths of every file below directory."""
        directory = _norm(directory)
        prefix = directory + "/"
        return sorted(
            name[len(prefix):] for name in self.files if name.startswith(prefix)
        )

    def list_dir(self, directory):
        """Immediate child names (files and dirs) of directory, sorted."""
        directory = _norm(directory)
        prefix = directory + "/"
        children = set()
        for name in list(self.files) + list(self.dirs):
            if name.startswith(prefix):
                children.add(name[len(prefix):].split("/", 1)[0])
        return sorted(children)

    def snapshot(self):
        """Canonical text rendering of the whole tree, for idempotence checks."""
        lines = [f"D {name}" for name in sorted(self.dirs)]
        lines += [
            f"F {name} {sha256_hex(self.files[name])}" for name in sorted(self.files)
        ]
        return "\n".join(lines)


@dataclass
class SimNode:
    cpus: int
    gpus: int
    mem_mb: int
    used_cpus: int = 0
    used_gpus: int = 0
    used_mem: int = 0

    def fits(self, res):
        return (
            self.used_cpus + res["cpus"] <= self.cpus
            and self.used_gpus + res["gpus"] <= self.gpus
            and self.used_mem + res["mem_mb"] <= self.mem_mb
        )

    def can_ever_fit(self, res):
        return (
            res["cpus"] <= self.cpus
            and res["gpus"] <= self.gpus
            and res["mem_mb"] <= self.mem_mb
        )

    def commit(self, res):
        self.used_cpus += res["cpus"]
        self.used_gpus += res["gpus"]
        self.used_mem += res["mem_mb"]
        assert self.used_cpus <= self.cpus
        assert self.used_gpus <= self.gpus
        assert self.used_mem <= self.mem_mb

    def release(self, res):
        self.used_cpus -= res["cpus"]
        self.used_gpus -= res["gpus"]
        self.used_mem -= res["mem_mb"]


@dataclass
class SimTask:
    entry_id: str  # "42" or "42_3"
    index: int  # array index, or None
    state: JobState = JobState.PENDING
    start_time: int = None
    finish_time: int = None
    finish_state: JobState = None
    node: int = None
    exit_code: int = None


@dataclass
class SimJob:
    id: int
    script_path: str
    resources: dict  # cpus, gpus, mem_mb per task
    time_limit_min: int
    duration_s: int
    outputs_n: int
    output_pattern: str
    exports: dict
    env: dict
    array_spec: tuple = None  # (lo, hi) or None
    tasks: list = field(default_factory=list)
    submit_time: int = 0
    forced_state: JobState = None
    missing_output: bool = False
    reported_state: JobState = None  # last parent state emitted in events

    @property
    def is_array(self):
        return self.array_spec is not None

    def parent_state(self):
        if self.is_array:
            return aggregate_array_states(t.state for t in self.tasks)
        return self.tasks[0].state


@dataclass(frozen=True)
class SimEvent:
    time: int
    entry_id: str
    old_state: JobState
    new_state: JobState

    def render(self):
        old = self.old_state.value if self.old_state else "-"
        return f"{self.time} {self.entry_id} {old}->{self.new_state.value}"


@dataclass(frozen=True)
class FaultDirective:
    """Force matched jobs into a terminal state, or suppress their outputs."""

    script_substring: str = None
    job_id: int = None
    forced_state: JobState = None
    missing_output: bool = False

    def matches(self, job):
        if self.job_id is not None:
            return job.id == self.job_id
        if self.script_substring is not None:
            return self.script_substring in job.script_path
        return False


def load_topology(text):
    doc = json.loads(text)
    nodes = doc["nodes"] if isinstance(doc, dict) else doc
    return [
        {"cpus": int(n["cpus"]), "gpus": int(n.get("gpus", 0)), "mem_mb": int(n["mem_mb"])}
        for n in nodes
    ]


class SimCluster:
    def __init__(self, nodes=None):
        specs = nodes if nodes is not None else DEFAULT_NODES
        self.nodes = [SimNode(**spec) for spec in specs]
        self.clock = 0
        self.fs = SimFS()
        self.jobs = {}
        self.next_job_id = 1
        self.event_log = []
        self.faults = []
        self.failing_pulls = set()
        self.lock = threading.RLock()

    # -- submission --------------------------------------------------------

    def _parse_script(self, path, env):
        text = self.fs.read(path).decode()
        directives = dict(scan_directives(text))
        sim = scan_sim_annotation(text)
        exports = dict(scan_env_exports(text))
        resources = {
            "cpus": int(directives.get("--cpus-per-task", 1)),
            "gpus": 0,
            "mem_mb": int(directives.get("--mem", 1024)),
        }
        gres = directives.get("--gres", "")
        if gres.startswith("gpu:"):
            resources["gpus"] = int(gres.split(":", 1)[1])
        time_limit = clock_to_minutes(directives.get("--time", "01:00:00"))
        array_spec = None
        if "--array" in directives:
            lo, hi = directives["--array"].split("-", 1)
            array_spec = (int(lo), int(hi))
        return {
            "resources": resources,
            "time_limit_min": time_limit,
            "duration_s": sim.duration_s if sim else _DEFAULT_DURATION_S,
            "outputs_n": sim.outputs if sim else 0,
            "output_pattern": directives.get("--output", ""),
            "exports": exports,
            "array_spec": array_spec,
            "env": dict(env),
        }

    def _sbatch(self, path, env):
        if not self.fs.exists(path):
            return ExecResult(1, "", f"sbatch: error: Unable to open file {path}\n", 0)
        try:
            parsed = self._parse_script(path, env)
        except (ValueError, SourceMissing) as exc:
            return ExecResult(1, "", f"sbatch: error: {exc}\n", 0)
        job_id = self.next_job_id
        self.next_job_id += 1
        job = SimJob(id=job_id, script_path=path, submit_time=self.clock, **parsed)
        if job.is_array:
            lo, hi = job.array_spec
            job.tasks = [
                SimTask(entry_id=f"{job_id}_{k}", index=k) for k in range(lo, hi + 1)
            ]
        else:
            job.tasks = [SimTask(entry_id=str(job_id), index=None)]
        for fault in self.faults:
            if fault.matches(job) or (
                fault.script_substring is not None
                and fault.script_substring in self.fs.read(path).decode()
            ):
                if fault.forced_state is not None:
                    job.forced_state = fault.forced_state
                job.missing_output = job.missing_output or fault.missing_output
        self.jobs[job_id] = job
        job.reported_state = JobState.PENDING
        self._log(SimEvent(self.clock, str(job_id), None, JobState.PENDING))
        return ExecResult(0, f"Submitted batch job {job_id}\n", "", 0)

    # -- scheduling and time -----------------------------------------------

    def _log(self, event):
        self.event_log.append(event)

    def _pending_tasks(self):
        for job_id in sorted(self.jobs):
            job = self.jobs[job_id]
            for task in job.tasks:
                if task.state is JobState.PENDING:
                    yield job, task

    def _start_task(self, job, task, node_index, events):
        node = self.nodes[node_index]
        node.commit(job.resources)
        task.node = node_index
        task.start_time = self.clock
        limit_s = job.time_limit_min * 60
        if job.forced_state is JobState.TIMEOUT:
            task.finish_time = self.clock + limit_s
            task.finish_state = JobState.TIMEOUT
        elif job.forced_state is not None:
            task.finish_time = self.clock + min(job.duration_s, limit_s)
            task.finish_state = job.forced_state
        elif job.duration_s > limit_s:
            task.finish_time = self.clock + limit_s
            task.finish_state = JobState.TIMEOUT
        else:
            task.finish_time = self.clock + job.duration_s
            task.finish_state = JobState.COMPLETED
        self._transition(job, task, JobState.RUNNING, events)

    def _transition(self, job, task, new_state, events):
        old = task.state
        task.state = new_state
        event = SimEvent(self.clock, task.entry_id, old, new_state)
        self._log(event)
        events.append(event)
        parent = job.parent_state()
        if job.is_array and parent != job.reported_state:
            parent_event = SimEvent(self.clock, str(job.id), job.reported_state, parent)
            job.reported_state = parent
            self._log(parent_event)
            events.append(parent_event)
        elif not job.is_array:
            job.reported_state = parent

    def _schedule(self, events):
        # FIFO scan; a job is only passed over when no node fits it right now.
        for job, task in list(self._pending_tasks()):
            for index, node in enumerate(self.nodes):
                if node.fits(job.resources):
                    self._start_task(job, task, index, events)
                    break

    def _finish_task(self, job, task, events):
        self.nodes[task.node].release(job.resources)
        state = task.finish_state
        task.exit_code = 0 if state is JobState.COMPLETED else 1
        self._transition(job, task, state, events)
        self._write_task_log(job, task)
        if state is JobState.COMPLETED and not job.is_array:
            self._write_outputs(job)

    def _log_path(self, job, task):
        pattern = job.output_pattern
        if not pattern:
            return None
        token = str(job.id) if task.index is None else f"{job.id}_{task.index}"
        return pattern.replace("%j", token)

    def _write_task_log(self, job, task):
        path = self._log_path(job, task)
        if path is None:
            return
        lines = [
            f"job {task.entry_id} script {job.script_path}",
            f"started t={task.start_time} finished t={task.finish_time}",
            f"final state {task.state.value} exit {task.exit_code}",
        ]
        self.fs.make_dirs(posixpath.dirname(path))
        self.fs.write(path, ("\n".join(lines) + "\n").encode())
        if job.is_array and all(t.state.terminal for t in job.tasks):
            parent_path = job.output_pattern.replace("%j", str(job.id))
            summary = f"array job {job.id} tasks {len(job.tasks)} final {job.parent_state().value}\n"
            self.fs.write(parent_path, summary.encode())

    def _write_outputs(self, job):
        if job.missing_output or job.outputs_n <= 0:
            return
        out_dir = job.exports.get("OUT_PATH") or job.env.get("OUT_PATH")
        if not out_dir:
            return
        in_dir = job.exports.get("IN_PATH") or job.env.get("IN_PATH")
        stems = []
        if in_dir and self.fs.is_dir(in_dir):
            for child in self.fs.list_dir(in_dir):
                stems.append(child.split(".", 1)[0])
        self.fs.make_dirs(out_dir)
        for k in range(job.outputs_n):
            name = f"{stems[k]}_mask.tiff" if k < len(stems) else f"output_{k}.tiff"
            content = f"placeholder output {name} from job {job.id}\n".encode()
            self.fs.write(posixpath.join(out_dir, name), content)

    def advance(self, dt):
        """Advance virtual time by dt seconds, returning emitted events."""
        events = []
        if dt <= 0:
            return events
        horizon = self.clock + dt
        self._schedule(events)
        while True:
            running = [
                (task.finish_time, job.id, task)
                for job in self.jobs.values()
                for task in job.tasks
                if task.state is JobState.RUNNING
            ]
            if not running:
                break
            next_time = min(t for t, _, _ in running)
            if next_time > horizon:
                break
            self.clock = next_time
            for finish_time, job_id, task in sorted(
                running, key=lambda item: (item[0], item[1], item[2].entry_id)
            ):
                if finish_time == next_time:
                    self._finish_task(self.jobs[job_id], task, events)
            self._schedule(events)
        self.clock = horizon
        return events

    # -- control -----------------------------------------------------------

    def _scancel(self, job_id):
        job = self.jobs.get(job_id)
        if job is None:
            return ExecResult(0, "", "", 0)
        events = []
        for task in job.tasks:
            if task.state is JobState.PENDING:
                self._transition(job, task, JobState.CANCELLED, events)
                task.exit_code = 1
            elif task.state is JobState.RUNNING:
                self.nodes[task.node].release(job.resources)
                task.finish_time = self.clock
                self._transition(job, task, JobState.CANCELLED, events)
                task.exit_code = 1
                self._write_task_log(job, task)
        return ExecResult(0, "", "", 0)

    def inject_fault(self, fault):
        self.faults.append(fault)

    def unschedulable_jobs(self):
        """Pending jobs that no node could ever fit."""
        stuck = []
        for job_id in sorted(self.jobs):
            job = self.jobs[job_id]
            if any(t.state is JobState.PENDING for t in job.tasks) and not any(
                node.can_ever_fit(job.resources) for node in self.nodes
            ):
                stuck.append(job_id)
        return stuck

    def render_event_trace(self):
        return "\n".join(event.render() for event in self.event_log)

    # -- command grammar -----------------------------------------------------

    def _sacct(self, tokens):
        try:
            j_index = tokens.index("-j")
            ids = [int(x) for x in tokens[j_index + 1].split(",") if x]
        except (ValueError, IndexError):
            return ExecResult(1, "", "sacct: error: invalid job id list\n", 0)
        lines = []
        for job_id in ids:
            job = self.jobs.get(job_id)
            if job is None:
                continue
            for task in job.tasks:
                lines.append(f"{task.entry_id}|{task.state.value}")
        out = "".join(line + "\n" for line in lines)
        return ExecResult(0, out, "", 0)

    def _zip(self, archive, directory):
        if not self.fs.is_dir(directory):
            return ExecResult(12, "", f"zip error: no such directory {directory}\n", 0)
        names = self.fs.files_under(directory)
        if not names:
            return ExecResult(12, "", "zip error: Nothing to do!\n", 0)
        buffer = io.BytesIO()
        with zipfile.ZipFile(buffer, "w", zipfile.ZIP_DEFLATED) as archive_file:
            for name in names:
                info = zipfile.ZipInfo(name, date_time=_ZIP_EPOCH)
                archive_file.writestr(
                    info, self.fs.read(posixpath.join(directory, name))
                )
        try:
            self.fs.write(archive, buffer.getvalue())
        except DestinationUnwritable as exc:
            return ExecResult(15, "", f"zip error: {exc}\n", 0)
        return ExecResult(0, "", "", 0)

    def _unzip(self, archive, directory):
        if not self.fs.exists(archive):
            return ExecResult(9, "", f"unzip: cannot find {archive}\n", 0)
        self.fs.make_dirs(directory)
        with zipfile.ZipFile(io.BytesIO(self.fs.read(archive))) as archive_file:
            for info in archive_file.infolist():
                target = posixpath.join(directory, info.filename)
                if info.is_dir():
                    self.fs.make_dirs(target)
                else:
                    self.fs.make_dirs(posixpath.dirname(target))
                    self.fs.write(target, archive_file.read(info))
        return ExecResult(0, "", "", 0)

    def sim_exec(self, command):
        """Execute one supported command against the cluster."""
        with self.lock:
            return self._dispatch(list(command))

    def _dispatch(self, tokens):
        env = {}
        if tokens and tokens[0] == "env":
            tokens = tokens[1:]
            while tokens and "=" in tokens[0] and not tokens[0].startswith("-"):
                name, _, value = tokens[0].partition("=")
                env[name] = value
                tokens = tokens[1:]
        if not tokens:
            return ExecResult(127, "", "command not found\n", 0)
        cmd, args = tokens[0], tokens[1:]
        if cmd == "sbatch":
            return self._sbatch(args[-1], env)
        if cmd == "sacct":
            return self._sacct(args)
        if cmd == "scancel":
            try:
                return self._scancel(int(args[0]))
            except (ValueError, IndexError):
                return ExecResult(1, "", "scancel: error: invalid job id\n", 0)
        if cmd == "mkdir":
            for path in args:
                if path != "-p":
                    self.fs.make_dirs(path)
            return ExecResult(0, "", "", 0)
        if cmd == "rm":
            for path in args:
                if not path.startswith("-"):
                    self.fs.remove_tree(path)
            return ExecResult(0, "", "", 0)
        if cmd == "test":
            if len(args) == 2 and args[0] == "-e":
                return ExecResult(0 if self.fs.exists(args[1]) else 1, "", "", 0)
            return ExecResult(2, "", "test: invalid arguments\n", 0)
        if cmd == "zip":
            paths = [a for a in args if not a.startswith("-")]
            if len(paths) == 2:
                return self._zip(paths[0], paths[1])
            return ExecResult(16, "", "zip error: usage\n", 0)
        if cmd == "unzip":
            if len(args) == 3 and args[1] == "-d":
                return self._unzip(args[0], args[2])
            return ExecResult(10, "", "unzip: usage\n", 0)
        if cmd == "singularity" and args[:1] == ["pull"]:
            paths = [a for a in args[1:] if not a.startswith("-")]
            if len(paths) != 2:
                return ExecResult(1, "", "singularity: usage: pull <dest> <src>\n", 0)
            dest, src = paths
            if src in self.failing_pulls:
                return ExecResult(255, "", f"FATAL: unable to pull {src}\n", 0)
            try:
                self.fs.write(dest, f"SIF placeholder for {src}\n".encode())
            except DestinationUnwritable as exc:
                return ExecResult(1, "", f"FATAL: {exc}\n", 0)
            return ExecResult(0, "", "", 0)
        if cmd == "echo":
            return ExecResult(0, " ".join(args) + "\n", "", 0)
        if cmd == "true":
            return ExecResult(0, "", "", 0)
        if cmd == "false":
            return ExecResult(1, "", "", 0)
        return ExecResult(127, "", f"{cmd}: command not found\n", 0)

    # -- persistence ---------------------------------------------------------

    def to_dict(self):
        def task_dict(task):
            return {
                "entry_id": task.entry_id,
                "index": task.index,
                "state": task.state.value,
                "start_time": task.start_time,
                "finish_time": task.finish_time,
                "finish_state": task.finish_state.value if task.finish_state else None,
                "node": task.node,
                "exit_code": task.exit_code,
            }

        return {
            "nodes": [
                {
                    "cpus": n.cpus,
                    "gpus": n.gpus,
                    "mem_mb": n.mem_mb,
                    "used_cpus": n.used_cpus,
                    "used_gpus": n.used_gpus,
                    "used_mem": n.used_mem,
                }
                for n in self.nodes
            ],
            "clock": self.clock,
            "next_job_id": self.next_job_id,
            "dirs": sorted(self.fs.dirs),
            "files": {
                name: b64encode(data).decode()
                for name, data in sorted(self.fs.files.items())
            },
            "jobs": [
                {
                    "id": job.id,
                    "script_path": job.script_path,
                    "resources": job.resources,
                    "time_limit_min": job.time_limit_min,
                    "duration_s": job.duration_s,
                    "outputs_n": job.outputs_n,
                    "output_pattern": job.output_pattern,
                    "exports": job.exports,
                    "env": job.env,
                    "array_spec": list(job.array_spec) if job.array_spec else None,
                    "submit_time": job.submit_time,
                    "forced_state": job.forced_state.value if job.forced_state else None,
                    "missing_output": job.missing_output,
                    "reported_state": job.reported_state.value
                    if job.reported_state
                    else None,
                    "tasks": [task_dict(t) for t in job.tasks],
                }
                for _, job in sorted(self.jobs.items())
            ],
        }

    @classmethod
    def from_dict(cls, doc):
        cluster = cls(nodes=[])
        cluster.nodes = [SimNode(**spec) for spec in doc["nodes"]]
        cluster.clock = doc["clock"]
        cluster.next_job_id = doc["next_job_id"]
        cluster.fs.dirs = set(doc["dirs"]) | {"/"}
        cluster.fs.files = {
            name: b64decode(data) for name, data in doc["files"].items()
        }
        for job_doc in doc["jobs"]:
            job = SimJob(
                id=job_doc["id"],
                script_path=job_doc["script_path"],
                resources=job_doc["resources"],
                time_limit_min=job_doc["time_limit_min"],
                duration_s=job_doc["duration_s"],
                outputs_n=job_doc["outputs_n"],
                output_pattern=job_doc["output_pattern"],
                exports=job_doc["exports"],
                env=job_doc["env"],
                array_spec=tuple(job_doc["array_spec"])
                if job_doc["array_spec"]
                else None,
                submit_time=job_doc["submit_time"],
                forced_state=JobState(job_doc["forced_state"])
                if job_doc["forced_state"]
                else None,
                missing_output=job_doc["missing_output"],
                reported_state=JobState(job_doc["reported_state"])
                if job_doc["reported_state"]
                else None,
            )
            for task_doc in job_doc["tasks"]:
                job.tasks.append(
                    SimTask(
                        entry_id=task_doc["entry_id"],
                        index=task_doc["index"],
                        state=JobState(task_doc["state"]),
                        start_time=task_doc["start_time"],
                        finish_time=task_doc["finish_time"],
                        finish_state=JobState(task_doc["finish_state"])
                        if task_doc["finish_state"]
                        else None,
                        node=task_doc["node"],
                        exit_code=task_doc["exit_code"],
                    )
                )
            cluster.jobs[job.id] = job
        return cluster

    def save_state(self, path):
        with open(path, "w") as handle:
            json.dump(self.to_dict(), handle)

    @classmethod
    def load_state(cls, path):
        with open(path) as handle:
            return cls.from_dict(json.load(handle))


class SimEndpoint(Endpoint):
    """Endpoint backend over an in-process SimCluster; poll sleeps advance
    the virtual clock."""

    def __init__(self, cluster=None):
        self.cluster = cluster if cluster is not None else SimCluster()
        self._delays = []  # (prefix tuple, seconds)

    def script_delay(self, prefix, seconds):
        """Make commands starting with prefix appear to take this long."""
        self._delays.append((tuple(prefix), seconds))

    def _delay_for(self, command):
        for prefix, seconds in self._delays:
            if tuple(command[: len(prefix)]) == prefix:
                return seconds
        return 0

    def exec(self, command, timeout=DEFAULT_DEADLINE_S):
        delay = self._delay_for(command)
        if delay > timeout:
            raise Timeout(f"deadline of {timeout}s exceeded")
        result = self.cluster.sim_exec(command)
        return ExecResult(
            result.exit_code, result.stdout, result.stderr, int(delay * 1000)
        )

    def put_file(self, local, remote):
        import os

        if not os.path.isfile(local):
            raise SourceMissing(local)
        with open(local, "rb") as handle:
            data = handle.read()
        with self.cluster.lock:
            self.cluster.fs.write(remote, data)
            stored = self.cluster.fs.read(remote)
        checksum = file_sha256(local)
        if sha256_hex(stored) != checksum:
            raise ChecksumMismatch(remote)
        return TransferReport(bytes=len(data), checksum=checksum)

    def get_file(self, remote, local):
        with self.cluster.lock:
            data = self.cluster.fs.read(remote)
            remote_sum = sha256_hex(data)
        with open(local, "wb") as handle:
            handle.write(data)
        local_sum = file_sha256(local)
        if local_sum != remote_sum:
            raise ChecksumMismatch(remote)
        return TransferReport(bytes=len(data), checksum=local_sum)

    def path_exists(self, remote):
        with self.cluster.lock:
            return self.cluster.fs.exists(remote)

    def make_dirs(self, remote):
        with self.cluster.lock:
            self.cluster.fs.make_dirs(remote)

    def remove_tree(self, remote):
        with self.cluster.lock:
            self.cluster.fs.remove_tree(remote)

    def sleep(self, seconds):
        with self.cluster.lock:
            self.cluster.advance(seconds)

    def clone(self):
        return SimEndpoint(self.cluster)
