import json
from pathlib import Path

import pytest

from relhyp.domain.cancellation import PieceReport
from relhyp.domain.constants import ConstantsReport, LemmaReport
from relhyp.domain.covering import CoverReport
from relhyp.domain.errors import SchemaMismatch
from relhyp.repository.report import (
    BallResult,
    ConstantsResult,
    CoverResult,
    json_schemas,
    read_report,
    render_report,
    schema_id,
    write_report,
)


def _constants() -> ConstantsReport:
    return ConstantsReport(
        n=2, rho_x=5, xi_hat=1, L_hat=2, eps={0: 0.0}, L=2, xi=1, sigma=5, rho=12, mu=41, caps={"side_cap": 2},
        diverging=True, verdict="not relatively hyperbolic at window scale",
    )


def _cover() -> CoverReport:
    return CoverReport(
        metric="d_rel", scale=1, domain_size=161, cells=20, covered=True, mesh=8, multiplicity=3,
        center_radius=4, mesh_bound=8, center_bound=4, multiplicity_bound=15, mu=5,
    )


class TestWriteReport:
    """Test report envelopes on disk."""

    def test_envelope_fields(self, tmp_path):
        """Test the schema id, parameters and result of a written report."""
        result = BallResult(n=1, rho_x=2, vertices=9, edges=20, dump="")

        path = write_report(tmp_path, "ball", result, {"n": 1, "rho_x": 2}, "specs/free-product-zz.yaml")
        data = json.loads(path.read_text())

        assert path.name == "ball.json"
        assert data["schema"] == "relhyp.ball/1"
        assert data["parameters"] == {"n": 1, "rho_x": 2}
        assert data["result"]["vertices"] == 9
        assert data["passed"] is True

    def test_output_is_deterministic(self, tmp_path):
        """Test that writing the same report twice gives identical bytes."""
        result = ConstantsResult(constants=_constants())

        first = write_report(tmp_path / "a", "constants", result, {"n": 2}).read_bytes()
        second = write_report(tmp_path / "b", "constants", result, {"n": 2}).read_bytes()

        assert first == second
        assert first.endswith(b"\n")

    def test_custom_name(self, tmp_path):
        """Test that reports can be written under another file name."""
        result = CoverResult(mode="graph", report=_cover(), cells=[["1"]])

        path = write_report(tmp_path, "cover", result, name="cover-graph")

        assert path.name == "cover-graph.json"


class TestReadReport:
    """Test validation when reading reports back."""

    def test_read_back(self, tmp_path):
        """Test that a written report validates into its result model."""
        path = write_report(tmp_path, "constants", ConstantsResult(constants=_constants()), {"n": 2}, passed=False)

        envelope, result = read_report(path)

        assert envelope.kind == "constants"
        assert not envelope.passed
        assert isinstance(result, ConstantsResult)
        assert result.constants.diverging

    def test_bad_result_field(self, tmp_path):
        """Test that a corrupted field is named in the error."""
        path = write_report(tmp_path, "cover", CoverResult(mode="graph", report=_cover(), cells=[]))
        data = json.loads(path.read_text())
        data["result"]["report"]["multiplicity"] = "many"
        path.write_text(json.dumps(data))

        with pytest.raises(SchemaMismatch) as excinfo:
            read_report(path)
        assert excinfo.value.field == "result.report.multiplicity"

    def test_unknown_schema(self, tmp_path):
        """Test that unknown schema ids are refused."""
        path = tmp_path / "x.json"
        path.write_text(json.dumps({"schema": "relhyp.nothing/1", "result": {}}))

        with pytest.raises(SchemaMismatch) as excinfo:
            read_report(path)
        assert excinfo.value.field == "schema"

    def test_missing_envelope_field(self, tmp_path):
        """Test that a missing schema id is reported."""
        path = tmp_path / "x.json"
        path.write_text(json.dumps({"result": {}}))

        with pytest.raises(SchemaMismatch) as excinfo:
            read_report(path)
        assert excinfo.value.field == "schema"

    def test_not_json(self, tmp_path):
        """Test that unreadable files are a schema mismatch."""
        path = tmp_path / "x.json"
        path.write_text("{")

        with pytest.raises(SchemaMismatch):
            read_report(path)


class TestRenderReport:
    """Test the combined plain-text table."""

    def test_empty(self):
        """Test that no reports render nothing."""
        assert render_report([]) == ""

    def test_combined_table(self, tmp_path):
        """Test one table over constants, cover and piece reports."""
        checks = [LemmaReport(check="connected-components", parameters={"s": 0}, violations=["p1=..."])]
        paths = [
            write_report(tmp_path, "constants", ConstantsResult(constants=_constants(), checks=checks), passed=False),
            write_report(tmp_path, "cover", CoverResult(mode="graph", report=_cover(), cells=[])),
            write_report(
                tmp_path, "sc-check",
                PieceReport(n=60, i_max=12, alphabet_size=1, lam="1/6", fraction="1/61", fraction_value=1 / 61,
                            satisfied=True),
            ),
        ]

        table = render_report(paths)
        lines = table.splitlines()

        assert lines[0].split() == ["report", "check", "bound", "measured", "status"]
        assert any("multiplicity@1" in line and "<= 15" in line for line in lines)
        assert any(line.startswith("constants") and "divergence" in line and "FAIL" in line for line in lines)
        assert any("piece fraction" in line and "1/61" in line for line in lines)
        assert any("connected-components" in line for line in lines)


class TestSchemas:
    """Test the published JSON schemas."""

    def test_every_kind_has_a_schema(self):
        """Test that each report kind exports a JSON schema."""
        schemas = json_schemas()

        assert schema_id("cover") in schemas
        assert len(schemas) == 7
        assert all(s["type"] == "object" for s in schemas.values())

    def test_documented(self):
        """Test that docs/reports.md names every schema and its result fields."""
        docs = (Path(__file__).resolve().parents[2] / "docs" / "reports.md").read_text(encoding="utf-8")

        for schema, body in json_schemas().items():
            assert f"## {schema}" in docs
            assert all(f"`{name}`" in docs for name in body["properties"])
