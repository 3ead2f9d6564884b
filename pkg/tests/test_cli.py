# SPDX-License-Identifier: Apache-2.0
# Copyright Contributors to the minimax-sampler project

"""Unit tests for the command line, file formats and report hooks"""

import json
import os
import shutil
import tempfile
import unittest
from unittest import mock

import numpy as np
from click.testing import CliRunner

from minimax_sampler import adapter, cli, hooks
from minimax_sampler.designs import EnumeratedDesign
from minimax_sampler.errors import InputFormatError, ValidationError
from minimax_sampler.popmodel import load_bounds


SCHEMA_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "schemas")

WORKED_BOUNDS = """\
id,a,b
a,-0.5,0.5
b,-1,1
c,-1.5,1.5
"""

OBSERVED_BOUNDS = """\
# worked instance with observations
id,a,b,y,sampled
a,-0.5,0.5,0.1,1
b,-1,1,0.4,yes
c,-1.5,1.5,1.0,true
"""

SQUARE_BOUNDS = """\
id,a,b
u1,-1,1
u2,-1,1
"""


def required_keys(name):
    with open(os.path.join(SCHEMA_DIR, name + ".schema.json")) as handle:
        return json.load(handle)["required"]


class CliTestCase(unittest.TestCase):
    """Temporary directory and helpers shared by the command tests."""

    def setUp(self):
        self.tmpdir = tempfile.mkdtemp(prefix="minimax_sampler_")

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def write(self, name, text):
        path = os.path.join(self.tmpdir, name)
        with open(path, "w") as handle:
            handle.write(text)
        return path

    def invoke(self, args, output="report.json"):
        """Run the command line with ``-o`` and return (exit code, report)."""
        path = os.path.join(self.tmpdir, output)
        result = CliRunner().invoke(cli.main, args + ["-o", path])
        with open(path) as handle:
            text = handle.read()
        if output.endswith(".json"):
            return result.exit_code, json.loads(text)
        return result.exit_code, text

    def assert_schema(self, report, name):
        for key in required_keys("report"):
            self.assertIn(key, report)
        for key in required_keys(name):
            self.assertIn(key, report["results"])


class DesignCommandTest(CliTestCase):
    """Test case for the design subcommand."""

    def test_worked_instance(self):
        bounds = self.write("bounds.csv", WORKED_BOUNDS)
        code, report = self.invoke(["design", "--bounds", bounds, "--budget", "2"])
        self.assertEqual(code, cli.EXIT_OK)
        self.assert_schema(report, "design")
        results = report["results"]
        np.testing.assert_allclose(results["pi_star"], [1 / 3.0, 2 / 3.0, 1.0], atol=1e-12)
        self.assertAlmostEqual(results["v_n"], 1.0, delta=1e-12)
        self.assertAlmostEqual(results["lambda"], 2.25, delta=1e-12)
        self.assertEqual(results["capped"], ["c"])
        self.assertEqual(results["unit_ids"], ["a", "b", "c"])
        self.assertEqual(report["schema_version"], "1.0")
        self.assertEqual(len(report["inputs_digest"]), 64)

    def test_stdout_report(self):
        bounds = self.write("bounds.csv", WORKED_BOUNDS)
        result = CliRunner().invoke(cli.main, ["design", "--bounds", bounds, "--budget", "3"])
        self.assertEqual(result.exit_code, cli.EXIT_OK)
        self.assertIn('"c": "inf"', result.output)
        self.assertIn('"lambda": 0.0', result.output)
        self.assertIn('"v_n": 0.0', result.output)

    def test_csv_table(self):
        bounds = self.write("bounds.csv", WORKED_BOUNDS)
        code, text = self.invoke(
            ["design", "--bounds", bounds, "--budget", "2", "--format", "csv"],
            output="report.csv",
        )
        self.assertEqual(code, cli.EXIT_OK)
        lines = text.splitlines()
        self.assertEqual(lines[0], "capped,id,pi_star,radius")
        self.assertEqual(len(lines), 4)
        self.assertTrue(lines[3].startswith("True,c,1.0,"))

    def test_degenerate_units(self):
        bounds = self.write("bounds.csv", WORKED_BOUNDS + "fixed,2,2\n")
        code, report = self.invoke(["design", "--bounds", bounds, "--budget", "2"])
        self.assertEqual(code, cli.EXIT_VALIDATION)
        codes = [d["code"] for d in report["results"]["diagnostics"]]
        self.assertEqual(codes, ["DegenerateUnit"])

        code, report = self.invoke(
            ["design", "--bounds", bounds, "--budget", "2", "--strip-degenerate"]
        )
        self.assertEqual(code, cli.EXIT_OK)
        self.assertEqual(report["results"]["removed_ids"], ["fixed"])
        self.assertEqual(report["results"]["known_total"], 2.0)
        self.assertEqual(report["results"]["unit_ids"], ["a", "b", "c"])


class EstimateCommandTest(CliTestCase):
    """Test case for the estimate subcommand."""

    def test_pi_from_design_report(self):
        bounds = self.write("bounds.csv", OBSERVED_BOUNDS)
        code, _ = self.invoke(
            ["design", "--bounds", bounds, "--budget", "2"], output="design.json"
        )
        self.assertEqual(code, cli.EXIT_OK)
        design_report = os.path.join(self.tmpdir, "design.json")

        code, report = self.invoke(
            ["estimate", "--bounds", bounds, "--pi-from", design_report]
        )
        self.assertEqual(code, cli.EXIT_OK)
        self.assert_schema(report, "estimate")
        results = report["results"]
        # 0.1 / (1/3) + 0.4 / (2/3) + 1.0
        self.assertAlmostEqual(results["estimate"], 1.9, delta=1e-12)
        self.assertEqual(results["midpoint_total"], 0.0)
        self.assertTrue(results["in_range"])
        self.assertEqual(results["sample_ids"], ["a", "b", "c"])
        self.assertEqual(results["estimator"], "midpoint_ht")

    def test_empty_sample_file(self):
        bounds = self.write("bounds.csv", "id,a,b\nu1,0,2\nu2,0,4\n")
        sample = self.write("sample.txt", "")
        code, report = self.invoke(
            ["estimate", "--bounds", bounds, "--budget", "1", "--sample", sample]
        )
        self.assertEqual(code, cli.EXIT_OK)
        self.assertEqual(report["results"]["estimate"], 3.0)
        self.assertEqual(report["results"]["sample_size"], 0)
        self.assertIn("empty sample", report["warnings"])

    def test_missing_value(self):
        bounds = self.write("bounds.csv", "id,a,b,y\nu1,0,2,1.0\nu2,0,4,\n")
        sample = self.write("sample.txt", "u1\n2\n")
        code, report = self.invoke(
            ["estimate", "--bounds", bounds, "--budget", "1", "--sample", sample]
        )
        self.assertEqual(code, cli.EXIT_VALIDATION)
        self.assertEqual(report["results"]["error"]["code"], "MissingValue")


class AuditCommandTest(CliTestCase):
    """Test case for the audit and oracle subcommands."""

    def test_srswor_audit(self):
        bounds = self.write("unit2.csv", SQUARE_BOUNDS)
        code, report = self.invoke(
            ["audit", "--design", "srswor", "--size", "2", "--of", "2", "--bounds", bounds]
        )
        self.assertEqual(code, cli.EXIT_OK)
        self.assert_schema(report, "audit")
        results = report["results"]
        self.assertEqual(results["kind"], "srswor")
        self.assertEqual(results["expected_size"], 1.0)
        self.assertAlmostEqual(results["sup_vertex_risk"], 4.0, delta=1e-12)
        self.assertAlmostEqual(results["d_pi"], 2.0, delta=1e-12)
        self.assertEqual(results["delta_max_offdiag"], 0.25)
        self.assertFalse(results["attains"])
        self.assertFalse(results["pairwise_independent"])

    def test_srswor_sample_size(self):
        bounds = self.write("unit2.csv", SQUARE_BOUNDS)
        code, report = self.invoke(
            ["audit", "--bounds", bounds, "--design", "srswor", "--sample-size", "2"]
        )
        self.assertEqual(code, cli.EXIT_OK)
        self.assertTrue(report["results"]["attains"])
        self.assertEqual(report["results"]["d_pi"], 0.0)

    def test_population_size_mismatch(self):
        bounds = self.write("bounds.csv", SQUARE_BOUNDS)
        for flags in (["--size", "2", "--of", "3"], ["--size", "3"]):
            code, report = self.invoke(
                ["audit", "--bounds", bounds, "--design", "srswor"] + flags
            )
            self.assertEqual(code, cli.EXIT_VALIDATION)
            self.assertEqual(report["results"]["error"]["code"], "DimensionMismatch")

    def test_enumerated_design_file(self):
        bounds = self.write("bounds.csv", SQUARE_BOUNDS)
        design = self.write(
            "design.json",
            json.dumps(
                [
                    {"subset": [1, 2], "p": 0.25},
                    {"subset": [1], "p": 0.25},
                    {"subset": [2], "p": 0.25},
                    {"subset": [], "p": 0.25},
                ]
            ),
        )
        code, report = self.invoke(["audit", "--bounds", bounds, "--design-file", design])
        self.assertEqual(code, cli.EXIT_OK)
        self.assertTrue(report["results"]["attains"])
        self.assertTrue(report["results"]["pairwise_independent"])

    def test_oracle_suite(self):
        bounds = self.write("bounds.csv", WORKED_BOUNDS)
        code, report = self.invoke(
            ["oracle", "--bounds", bounds, "--design", "srswor", "-k", "2", "--centers", "2"]
        )
        self.assertEqual(code, cli.EXIT_OK)
        self.assert_schema(report, "oracle")
        results = report["results"]
        self.assertTrue(results["lower_bound_holds"])
        self.assertTrue(results["equivalence_holds"])
        self.assertTrue(results["dominance_holds"])
        self.assertEqual(len(results["lower_bound"]), 4)
        self.assertEqual(report["warnings"], [])


class SimulateCommandTest(CliTestCase):
    """Test case for the simulate subcommand."""

    def test_reports_identical_across_threads(self):
        bounds = self.write("bounds.csv", WORKED_BOUNDS)
        args = ["simulate", "--bounds", bounds, "--budget", "2", "--reps", "500", "--seed", "5"]
        path_one = os.path.join(self.tmpdir, "one.json")
        path_four = os.path.join(self.tmpdir, "four.json")
        runner = CliRunner()
        first = runner.invoke(cli.main, ["--threads", "1"] + args + ["-o", path_one])
        second = runner.invoke(cli.main, ["--threads", "4"] + args + ["-o", path_four])
        self.assertEqual(first.exit_code, cli.EXIT_OK)
        self.assertEqual(second.exit_code, cli.EXIT_OK)
        with open(path_one, "rb") as one, open(path_four, "rb") as four:
            self.assertEqual(one.read(), four.read())

        with open(path_one) as handle:
            report = json.load(handle)
        self.assert_schema(report, "simulate")
        self.assertEqual(report["results"]["y_count"], 8)
        self.assertEqual(len(report["results"]["rows"]), 32)

    def test_y_file_and_rounding_warning(self):
        bounds = self.write("bounds.csv", WORKED_BOUNDS)
        y_file = self.write("y.csv", "id,upper,middle\na,0.5,0\nb,1,0\nc,1.5,0\n")
        code, report = self.invoke(
            [
                "simulate",
                "--bounds", bounds,
                "--budget", "1.5",
                "--reps", "100",
                "--strategy", "srswor",
                "--y-file", y_file,
            ]
        )
        self.assertEqual(code, cli.EXIT_OK)
        self.assertEqual(report["results"]["y_count"], 2)
        self.assertEqual(report["results"]["rounding"]["srswor_size"], 2)
        self.assertEqual(len(report["warnings"]), 1)
        self.assertIn("rounds budget", report["warnings"][0])


class ValidateCommandTest(CliTestCase):
    """Test case for input validation and exit codes."""

    def test_clean_input(self):
        bounds = self.write("bounds.csv", WORKED_BOUNDS)
        code, report = self.invoke(["validate", "--bounds", bounds, "--budget", "2"])
        self.assertEqual(code, cli.EXIT_OK)
        self.assert_schema(report, "validate")
        self.assertEqual(report["results"]["diagnostics"], [])
        self.assertEqual(report["results"]["population_size"], 3)

    def test_diagnostics(self):
        bounds = self.write(
            "bounds.csv", "id,a,b,y\nu1,3,1,\nu2,0,1,1.5\nu3,0,2,1\n"
        )
        code, report = self.invoke(["validate", "--bounds", bounds, "--budget", "0"])
        self.assertEqual(code, cli.EXIT_VALIDATION)
        diagnostics = report["results"]["diagnostics"]
        self.assertEqual(
            [(d["level"], d["code"]) for d in diagnostics],
            [
                ("error", "InvertedInterval"),
                ("error", "BudgetOutOfRange"),
                ("warning", "OutOfBounds"),
            ],
        )
        self.assertEqual(diagnostics[0]["unit_id"], "u1")
        self.assertEqual(diagnostics[2]["unit_id"], "u2")

    def test_missing_bounds_file(self):
        missing = os.path.join(self.tmpdir, "nope.csv")
        code, report = self.invoke(["validate", "--bounds", missing])
        self.assertEqual(code, cli.EXIT_VALIDATION)
        self.assertEqual(report["results"]["diagnostics"][0]["code"], "MissingFile")

    def test_internal_error(self):
        def broken(config, population, warnings):
            raise RuntimeError("boom")

        bounds = self.write("bounds.csv", WORKED_BOUNDS)
        with mock.patch.dict(cli._RUNNERS, {cli.CMD_VALIDATE: broken}):
            code, report = cli.run(cli.RunConfig(cli.CMD_VALIDATE, bounds=bounds))
        self.assertEqual(code, cli.EXIT_INTERNAL)
        self.assertEqual(report["results"]["error"]["code"], "InternalError")

    def test_run_reads_digest_of_existing_inputs(self):
        bounds = self.write("bounds.csv", WORKED_BOUNDS)
        config = cli.RunConfig(cli.CMD_VALIDATE, bounds=bounds)
        _, first = cli.run(config)
        _, second = cli.run(config)
        self.assertEqual(first["inputs_digest"], second["inputs_digest"])
        self.write("bounds.csv", WORKED_BOUNDS + "d,0,1\n")
        _, third = cli.run(config)
        self.assertNotEqual(first["inputs_digest"], third["inputs_digest"])


class AdapterTest(CliTestCase):
    """Test case for input readers."""

    def test_bounds_file(self):
        path = self.write("bounds.csv", OBSERVED_BOUNDS)
        content = adapter.read_bounds_csv(path)
        self.assertEqual(content.bounds.unit_ids, ("a", "b", "c"))
        self.assertEqual(content.observed, {0: 0.1, 1: 0.4, 2: 1.0})
        self.assertEqual(content.sampled, [0, 1, 2])
        self.assertEqual(content.rows[0]["line"], 3)

    def test_bounds_errors_carry_location(self):
        path = self.write("bounds.csv", "id,a,b\nu1,0,x\n")
        with self.assertRaises(InputFormatError) as ctx:
            adapter.read_bounds_csv(path)
        self.assertEqual(ctx.exception.line, 2)

        path = self.write("bounds.csv", "id,a\nu1,0\n")
        with self.assertRaises(InputFormatError):
            adapter.read_bounds_csv(path)

        path = self.write("bounds.csv", "id,a,b\nu1,0,1\nu2,5,1\n")
        with self.assertRaises(ValidationError) as ctx:
            adapter.read_bounds_csv(path)
        self.assertIn("bounds.csv:3", str(ctx.exception))

    def test_write_bounds_csv(self):
        bounds = load_bounds([("u1", -1.5, 2.0), ("u2", 0.0, 0.25)])
        path = os.path.join(self.tmpdir, "out.csv")
        adapter.write_bounds_csv(path, bounds, y=[0.5, 0.125])
        content = adapter.read_bounds_csv(path)
        self.assertEqual(content.bounds, bounds)
        self.assertEqual(content.observed, {0: 0.5, 1: 0.125})

    def test_design_file(self):
        design = EnumeratedDesign(3, [([0, 1], 0.5), ([2], 0.5)])
        path = os.path.join(self.tmpdir, "design.json")
        text = adapter.write_design_json(path, design, dry_run=True)
        self.assertFalse(os.path.exists(path))
        self.assertEqual(json.loads(text)[0], {"subset": [1, 2], "p": 0.5})

        path = self.write("design.json", json.dumps([{"subset": [1, 4], "p": 1.0}]))
        with self.assertRaises(ValidationError):
            adapter.read_design_json(path, 3)
        path = self.write("design.json", "{not json")
        with self.assertRaises(InputFormatError):
            adapter.read_design_json(path, 3)

    def test_sample_and_pi_files(self):
        bounds = load_bounds([("x", 0, 1), ("y", 0, 1), ("z", 0, 1)])
        sample = self.write("sample.txt", "# drawn\nz\n1\n")
        self.assertEqual(adapter.read_sample_file(sample, bounds), [0, 2])
        bad = self.write("bad.txt", "w\n")
        with self.assertRaises(InputFormatError):
            adapter.read_sample_file(bad, bounds)

        pi = self.write("pi.csv", "id,pi\nz,1\nx,0.25\ny,0.5\nextra,0.1\n")
        np.testing.assert_array_equal(adapter.read_pi_csv(pi, bounds), [0.25, 0.5, 1.0])
        partial = self.write("partial.csv", "id,pi\nx,0.25\n")
        with self.assertRaises(InputFormatError):
            adapter.read_pi_csv(partial, bounds)

    def test_outcomes_file(self):
        bounds = load_bounds([("x", 0, 1), ("y", 0, 1)])
        path = self.write("y.csv", "id,first,second\ny,0.5,1\nx,0,0.25\n")
        first, second = adapter.read_outcomes_csv(path, bounds)
        np.testing.assert_array_equal(first, [0.0, 0.5])
        np.testing.assert_array_equal(second, [0.25, 1.0])


class HooksTest(CliTestCase):
    """Test case for post-report hooks."""

    def tearDown(self):
        hooks.clear()
        super(HooksTest, self).tearDown()

    def test_hook_amends_report(self):
        def add_site(report):
            report["results"]["site"] = "north"
            return report

        hooks.register(hooks.HOOK_POST_REPORT, add_site)
        self.assertEqual(hooks.names(), [hooks.HOOK_POST_REPORT])
        path = os.path.join(self.tmpdir, "report.json")
        report, text = adapter.write_report(
            path, {"results": {}, "warnings": []}, dry_run=True
        )
        self.assertEqual(report["results"]["site"], "north")
        self.assertIn('"site": "north"', text)
        self.assertFalse(os.path.exists(path))

    def test_load_from_env(self):
        with mock.patch.dict(os.environ, {hooks.ENV_HOOKS: "minimax_sampler.util:to_jsonable"}):
            self.assertEqual(hooks.load_from_env(), 1)
        report, _ = adapter.write_report(None, {"results": {"x": np.float64(0.5)}})
        self.assertEqual(report, {"results": {"x": 0.5}})

        with mock.patch.dict(os.environ, {hooks.ENV_HOOKS: "no_colon"}):
            with self.assertRaises(ValidationError):
                hooks.load_from_env()
        with mock.patch.dict(os.environ, {hooks.ENV_HOOKS: "minimax_sampler:missing"}):
            with self.assertRaises(ValidationError):
                hooks.load_from_env()


if __name__ == "__main__":
    unittest.main()
