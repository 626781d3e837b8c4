import os
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slurmbridge import descriptor as descriptor_mod
from slurmbridge import jobscript as js
from slurmbridge.config import ResourceSpec
from slurmbridge.errors import InvalidCount, UnknownConverter

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")

RUN_PATHS = js.RunPaths(
    in_dir="/scratch/omero/data/RUN/in",
    out_dir="/scratch/omero/data/RUN/out",
    gt_dir="/scratch/omero/data/RUN/gt",
    image_file="/scratch/omero/singularity_images/cellpose_v1.2.9.sif",
)
LOGS_DIR = "/scratch/omero/logs"


def generate_cpu_script(cellpose_descriptor):
    values = descriptor_mod.validate_values(cellpose_descriptor, {})
    return js.generate_workflow_script(
        cellpose_descriptor, ResourceSpec(4096, 2, 0, 60), values, RUN_PATHS, LOGS_DIR
    )


class TestWorkflowScript:
    def test_cpu_directives(self, cellpose_descriptor):
        script = generate_cpu_script(cellpose_descriptor)
        assert ("--mem", "4096") in script.directives
        assert ("--cpus-per-task", "2") in script.directives
        assert ("--time", "01:00:00") in script.directives
        assert script.directive("--gres") is None

    def test_golden_file(self, cellpose_descriptor):
        script = generate_cpu_script(cellpose_descriptor)
        with open(os.path.join(DATA_DIR, "workflow_cpu.sh"), "rb") as handle:
            golden = handle.read()
        assert js.render_script(script).encode() == golden

    def test_gpu_variant_adds_one_gres_line(self, cellpose_descriptor):
        values = descriptor_mod.validate_values(cellpose_descriptor, {})
        script = js.generate_workflow_script(
            cellpose_descriptor, ResourceSpec(4096, 2, 1, 60), values, RUN_PATHS, LOGS_DIR
        )
        text = js.render_script(script)
        gres_lines = [l for l in text.splitlines() if l.startswith("#SBATCH --gres")]
        assert gres_lines == ["#SBATCH --gres=gpu:1"]
        cpu_text = js.render_script(generate_cpu_script(cellpose_descriptor))
        assert sorted(set(text.splitlines()) - set(cpu_text.splitlines())) == [
            "#SBATCH --gres=gpu:1"
        ]

    def test_no_params_exports_only_paths(self):
        descriptor = descriptor_mod.parse_descriptor(
            '{"name": "W", "schema-version": "cytomine-0.1",'
            ' "container-image": {"image": "demo/w", "version": "v1"},'
            ' "command-line": "run", "inputs": []}'
        )
        script = js.generate_workflow_script(
            descriptor, ResourceSpec(4096, 2, 0, 60), {}, RUN_PATHS, LOGS_DIR
        )
        assert [name for name, _ in script.env_exports] == [
            "IN_PATH", "OUT_PATH", "GT_PATH",
        ]

    def test_sim_annotation_in_body(self, cellpose_descriptor):
        values = descriptor_mod.validate_values(cellpose_descriptor, {})
        script = js.generate_workflow_script(
            cellpose_descriptor, ResourceSpec(4096, 2, 0, 60), values,
            RUN_PATHS, LOGS_DIR, sim=js.SimAnnotation(duration_s=25, outputs=4),
        )
        text = js.render_script(script)
        assert js.scan_sim_annotation(text) == js.SimAnnotation(25, 4)


class TestConversionScript:
    def _generate(self, n):
        return js.generate_conversion_script(
            n, "/scratch/omero/singularity_images/convert_zarr_to_tiff.sif",
            "zarr", "tiff", "/scratch/omero/data/RUN/in",
            ResourceSpec(4096, 2, 0, 60), LOGS_DIR,
        )

    def test_array_range(self):
        # Oracle: indices 0..n-1.
        assert self._generate(10).directive("--array") == "0-9"

    def test_single_item_boundary(self):
        assert self._generate(1).directive("--array") == "0-0"

    def test_unknown_converter(self):
        with pytest.raises(UnknownConverter):
            js.generate_conversion_script(
                3, None, "zarr", "png", "/d", ResourceSpec(4096, 2, 0, 60), LOGS_DIR
            )

    def test_invalid_count(self):
        with pytest.raises(InvalidCount):
            self._generate(0)

    def test_never_requests_gpu(self):
        script = js.generate_conversion_script(
            2, "img.sif", "zarr", "tiff", "/d", ResourceSpec(4096, 2, 3, 60), LOGS_DIR
        )
        assert script.directive("--gres") is None

    def test_uses_array_task_id(self):
        assert "$SLURM_ARRAY_TASK_ID" in self._generate(2).body[-1]


class TestRenderScript:
    def test_line_count_minimal(self):
        # Golden hand count: shebang + 4 directives + 1 body command.
        script = js.JobScript(
            directives=[("--mem", "1024"), ("--cpus-per-task", "1"),
                        ("--time", "00:10:00"), ("--output", "/logs/x-%j.log")],
            env_exports=[],
            body=["true"],
            logfile_path="/logs/x-%j.log",
        )
        assert len(js.render_script(script).splitlines()) == 6

    def test_deterministic(self, cellpose_descriptor):
        script = generate_cpu_script(cellpose_descriptor)
        assert js.render_script(script) == js.render_script(script)

    def test_quote_escaped_in_export(self):
        script = js.JobScript(
            directives=[("--mem", "1")], env_exports=[("MSG", 'say "hi"')],
            body=["true"], logfile_path="",
        )
        assert 'export MSG="say \\"hi\\""' in js.render_script(script)


class TestScanRoundTrip:
    def test_workflow_round_trip(self, cellpose_descriptor):
        script = generate_cpu_script(cellpose_descriptor)
        assert js.scan_directives(js.render_script(script)) == script.directives

    def test_conversion_round_trip(self):
        script = js.generate_conversion_script(
            7, "img.sif", "zarr", "tiff", "/d", ResourceSpec(2048, 4, 0, 30), LOGS_DIR
        )
        assert js.scan_directives(js.render_script(script)) == script.directives

    def test_env_export_names_wellformed(self, cellpose_descriptor):
        script = generate_cpu_script(cellpose_descriptor)
        for name, _ in script.env_exports:
            assert re.fullmatch(r"[A-Z][A-Z0-9_]*", name)


@settings(max_examples=300, deadline=None)
@given(st.integers(min_value=1, max_value=10080))
def test_time_rendering_property(minutes):
    # Independent check: parse the clock string back and compare.
    clock = js.minutes_to_clock(minutes)
    hours, mins, secs = clock.split(":")
    assert secs == "00"
    assert int(hours) * 60 + int(mins) == minutes
    assert 0 <= int(mins) < 60
    assert re.fullmatch(r"\d{2,}:\d{2}:\d{2}", clock)
