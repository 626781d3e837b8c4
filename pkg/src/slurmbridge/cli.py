"""Command-line surface: validate, init, run, status, logs, fetch, cancel, list."""

import json
import os
import sys

import click

from . import config as config_mod
from . import descriptor as descriptor_mod
from . import orchestrator, simslurm, slurm
from .errors import SlurmBridgeError, UnknownRunId
from .states import JobState
from .transport import SshEndpoint

EXIT_OK = 0
EXIT_RUN_FAILURE = 1
EXIT_USAGE = 2

DEFAULT_CONFIG = "./slurm-config.ini"


def _fail(message, code=EXIT_USAGE):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config(path):
    try:
        with open(path) as handle:
            return config_mod.parse_config(handle.read())
    except FileNotFoundError:
        _fail(f"config file not found: {path}")
    except SlurmBridgeError as exc:
        _fail(str(exc))


class SimSession:
    """Simulator endpoint with state persisted beside the topology file, so
    separate CLI invocations see one cluster."""

    def __init__(self, topology_path):
        self.state_path = None
        if topology_path:
            self.state_path = topology_path + ".state"
        if self.state_path and os.path.exists(self.state_path):
            cluster = simslurm.SimCluster.load_state(self.state_path)
        elif topology_path and os.path.exists(topology_path):
            with open(topology_path) as handle:
                cluster = simslurm.SimCluster(simslurm.load_topology(handle.read()))
        else:
            cluster = simslurm.SimCluster()
        self.endpoint = simslurm.SimEndpoint(cluster)

    def save(self):
        if self.state_path:
            self.endpoint.cluster.save_state(self.state_path)


def _endpoint(profile, simulate):
    if simulate is not None:
        return SimSession(simulate or None)
    session = SshEndpoint(profile)
    session.save = lambda: None
    session.endpoint = session
    return session


def _simulate_option(func):
    return click.option(
        "--simulate",
        default=None,
        is_flag=False,
        flag_value="",
        help="Use the embedded simulator; optionally pass a topology file.",
    )(func)


def _config_option(func):
    return click.option(
        "--config",
        "config_path",
        default=None,
        envvar="SLURMBRIDGE_CONFIG",
        help=f"Config file path (default {DEFAULT_CONFIG}).",
    )(func)


def _runs_dir_option(func):
    return click.option(
        "--runs-dir",
        default="./runs",
        show_default=True,
        help="Directory holding run journals.",
    )(func)


@click.group()
def main():
    """Run containerized image-analysis workflows on a Slurm cluster."""


@main.command("validate")
@click.argument("descriptor_path")
def cmd_validate(descriptor_path):
    """Parse a workflow descriptor and print its parameter table."""
    try:
        with open(descriptor_path) as handle:
            text = handle.read()
    except OSError as exc:
        _fail(str(exc))
    try:
        descriptor = descriptor_mod.parse_descriptor(text)
    except SlurmBridgeError as exc:
        _fail(str(exc))
    for warning in descriptor.warnings:
        click.echo(f"warning: {warning}", err=True)
    click.echo(f"name={descriptor.name}")
    click.echo(f"image={descriptor.container_image}:{descriptor.container_version}")
    for entry in descriptor_mod.describe_form(descriptor):
        default = "" if entry.default is None else descriptor_mod.render_value(entry.default)
        click.echo(
            f"param={entry.param_id}\ttype={entry.value_type.value}"
            f"\tdefault={default}\tlabel={entry.label}"
        )
    sys.exit(EXIT_OK)


@main.command("init")
@_config_option
@_simulate_option
def cmd_init(config_path, simulate):
    """Provision the managed scratch layout on the cluster."""
    profile, registry = _load_config(config_path or DEFAULT_CONFIG)
    session = _endpoint(profile, simulate)
    try:
        report = slurm.init_environment(session.endpoint, profile, registry)
    except SlurmBridgeError as exc:
        _fail(str(exc), code=EXIT_RUN_FAILURE)
    finally:
        session.save()
    click.echo(f"refreshed={'true' if report.refreshed else 'false'}")
    click.echo(f"dirs={len(report.created_dirs)}")
    click.echo(f"pulls={len(report.pulled_images)}")
    for name, path in report.pulled_images:
        click.echo(f"image={name}\t{path}")
    for name, message in report.failures:
        click.echo(f"failure={name}\t{message}", err=True)
    sys.exit(EXIT_RUN_FAILURE if report.failures else EXIT_OK)


def _parse_params(descriptor, params):
    values = {}
    for raw in params:
        if "=" not in raw:
            _fail(f"--param must be id=value, got {raw!r}")
        key, _, raw_value = raw.partition("=")
        try:
            spec = descriptor.param(key)
        except SlurmBridgeError as exc:
            _fail(str(exc))
        if spec.value_type is descriptor_mod.ValueType.BOOLEAN:
            values[key] = raw_value.lower() in ("1", "true", "yes")
        elif spec.value_type is descriptor_mod.ValueType.NUMBER:
            try:
                number = float(raw_value)
            except ValueError:
                _fail(f"parameter {key!r} expects a number, got {raw_value!r}")
            values[key] = int(number) if number.is_integer() else number
        else:
            values[key] = raw_value
    return values


def _load_descriptor_for(config_path, workflow):
    """The descriptor document is named per workflow next to the config via
    the descriptor_path key."""
    import configparser

    parser = configparser.ConfigParser(interpolation=None)
    parser.read(config_path)
    section = f"workflow.{workflow}"
    if section in parser and "descriptor_path" in parser[section]:
        path = parser[section]["descriptor_path"]
        if not os.path.isabs(path):
            path = os.path.join(os.path.dirname(os.path.abspath(config_path)), path)
        try:
            with open(path) as handle:
                return descriptor_mod.parse_descriptor(handle.read())
        except (OSError, SlurmBridgeError) as exc:
            _fail(f"cannot load descriptor for {workflow}: {exc}")
    _fail(f"no descriptor_path configured for workflow {workflow!r}")


@main.command("run")
@click.argument("workflow")
@_config_option
@_simulate_option
@_runs_dir_option
@click.option("--param", "params", multiple=True, help="Parameter as id=value.")
@click.option("--input", "input_dir", required=True, help="Local input directory.")
@click.option("--batch-size", default=0, type=int, help="Items per batch (default: all in one).")
@click.option("--output-mode", default="SingleZip",
              type=click.Choice(["ImagesFolder", "SidecarAttachments", "SingleZip"]))
@click.option("--output", "output_dir", default=".", help="Local output directory.")
@click.option("--skip-conversion", is_flag=True, default=False)
def cmd_run(workflow, config_path, simulate, runs_dir, params, input_dir,
            batch_size, output_mode, output_dir, skip_conversion):
    """Run a registered workflow over a folder of input images; blocks until
    every batch is terminal."""
    config_path = config_path or DEFAULT_CONFIG
    profile, registry = _load_config(config_path)
    if workflow not in registry.entries:
        _fail(f"workflow not registered: {workflow}")
    descriptor = _load_descriptor_for(config_path, workflow)
    values = _parse_params(descriptor, params)
    try:
        values = descriptor_mod.validate_values(descriptor, values)
    except SlurmBridgeError as exc:
        _fail(str(exc))
    if not os.path.isdir(input_dir):
        _fail(f"input directory not found: {input_dir}")
    items = orchestrator.scan_input_dir(input_dir)
    session = _endpoint(profile, simulate)
    options = orchestrator.RunOptions(
        skip_conversion=skip_conversion,
        output_mode=output_mode,
        journal_dir=runs_dir,
        poll_interval_s=2 if simulate is not None else slurm.DEFAULT_POLL_INTERVAL_S,
    )

    def listener(stage, detail):
        click.echo(f"[{stage}] {detail}", err=True)

    try:
        record = orchestrator.run_workflow_batched(
            session.endpoint, profile, registry, descriptor, workflow,
            values, items, batch_size or max(len(items), 1),
            options=options, local_output_dir=output_dir, listener=listener,
        )
    except SlurmBridgeError as exc:
        _fail(str(exc), code=EXIT_RUN_FAILURE)
    finally:
        session.save()
    click.echo(f"run_id={record.run_id}")
    click.echo(f"state={record.overall_state.value}")
    for artifact in record.output_artifacts:
        click.echo(f"artifact={artifact}")
    ok = record.overall_state is orchestrator.RunStage.DONE
    sys.exit(EXIT_OK if ok else EXIT_RUN_FAILURE)


def _journal_path(runs_dir, run_id):
    path = os.path.join(runs_dir, f"{run_id}.journal")
    if not os.path.exists(path):
        raise UnknownRunId(run_id)
    return path


def _read_journal(runs_dir, run_id):
    with open(_journal_path(runs_dir, run_id)) as handle:
        return [line.rstrip("\n").split("\t", 2) for line in handle if line.strip()]


@main.command("status")
@click.argument("run_id")
@_runs_dir_option
@_config_option
@_simulate_option
def cmd_status(run_id, runs_dir, config_path, simulate):
    """Show the stage journal of a run, plus live job states when reachable."""
    try:
        lines = _read_journal(runs_dir, run_id)
    except UnknownRunId as exc:
        _fail(str(exc))
    for timestamp, stage, detail in lines:
        click.echo(f"time={timestamp}\tstage={stage}\tdetail={detail}")
    final = lines[-1][1]
    click.echo(f"state={final}")
    terminal = {s.value for s in orchestrator.TERMINAL_STAGES}
    if final not in terminal and simulate is not None:
        profile, _ = _load_config(config_path or DEFAULT_CONFIG)
        session = _endpoint(profile, simulate)
        handles = _journal_handles(lines)
        if handles:
            states = slurm.poll_jobs(session.endpoint, handles)
            for job_id, state in sorted(states.items()):
                click.echo(f"job={job_id}\tstate={state.value}")
        session.save()
    sys.exit(EXIT_OK)


def _journal_handles(lines):
    handles = []
    for _, stage, detail in lines:
        if stage != "submit":
            continue
        fields = dict(part.split("=", 1) for part in detail.split() if "=" in part)
        handles.append(
            slurm.JobHandle(
                job_id=int(fields["job_id"]),
                kind=slurm.JobKind.CONVERSION_ARRAY
                if fields.get("kind") == "conversion"
                else slurm.JobKind.WORKFLOW,
                script_path="",
                logfile_path="",
                submitted_at=0.0,
                array_size=int(fields["tasks"]) if "tasks" in fields else None,
            )
        )
    return handles


@main.command("logs")
@click.argument("run_id")
@_runs_dir_option
@click.option("--dir", "log_dir", default=".", help="Where fetched logs were written.")
def cmd_logs(run_id, runs_dir, log_dir):
    """Print the fetched logfiles of a run."""
    try:
        lines = _read_journal(runs_dir, run_id)
    except UnknownRunId as exc:
        _fail(str(exc))
    job_ids = [handle.job_id for handle in _journal_handles(lines)]
    printed = False
    for job_id in job_ids:
        path = os.path.join(log_dir, f"omero-job-{job_id}.log")
        if os.path.exists(path):
            printed = True
            click.echo(f"== {path}")
            with open(path) as handle:
                click.echo(handle.read().rstrip("\n"))
    if not printed:
        click.echo("no logfiles found", err=True)
    sys.exit(EXIT_OK)


@main.command("fetch")
@click.argument("run_id")
@click.argument("destination")
@_runs_dir_option
@click.option("--from", "artifact_dir", default=".", help="Directory holding the run's result zips.")
@click.option("--mode", default="SingleZip",
              type=click.Choice(["ImagesFolder", "SidecarAttachments", "SingleZip"]))
def cmd_fetch(run_id, destination, runs_dir, artifact_dir, mode):
    """Re-import a finished run's result zips into a destination folder."""
    try:
        _journal_path(runs_dir, run_id)
    except UnknownRunId as exc:
        _fail(str(exc))
    zips = sorted(
        os.path.join(artifact_dir, name)
        for name in os.listdir(artifact_dir)
        if name.startswith(f"{run_id}_batch") and name.endswith(".zip")
    )
    record = orchestrator.RunRecord(
        run_id=run_id, workflow="", version="", values={}, items=[],
        batches=[
            orchestrator.BatchRun(index=i, items=[], result_zip=path,
                                  state=JobState.COMPLETED)
            for i, path in enumerate(zips)
        ],
    )
    try:
        written = orchestrator.import_results(record, destination, mode)
    except SlurmBridgeError as exc:
        _fail(str(exc), code=EXIT_RUN_FAILURE)
    for path in written:
        click.echo(f"written={path}")
    sys.exit(EXIT_OK)


@main.command("cancel")
@click.argument("run_id")
@_runs_dir_option
@_config_option
@_simulate_option
def cmd_cancel(run_id, runs_dir, config_path, simulate):
    """Cancel a run's outstanding jobs."""
    try:
        lines = _read_journal(runs_dir, run_id)
    except UnknownRunId as exc:
        _fail(str(exc))
    profile, _ = _load_config(config_path or DEFAULT_CONFIG)
    session = _endpoint(profile, simulate)
    handles = _journal_handles(lines)
    for handle in handles:
        slurm.cancel_job(session.endpoint, handle)
        click.echo(f"cancelled={handle.job_id}")
    session.save()
    sys.exit(EXIT_OK)


@main.command("list")
@_config_option
def cmd_list(config_path):
    """List registered workflows."""
    _, registry = _load_config(config_path or DEFAULT_CONFIG)
    for name in sorted(registry.entries):
        entry = registry.entries[name]
        resolved = config_mod.resolve_workflow(registry, name)
        click.echo(f"workflow={name}\tversion={entry.version}\timage={resolved.image_reference}")
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
