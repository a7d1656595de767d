import json
import logging
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from relhyp.domain.area import AreaReport, LinearBoundReport
from relhyp.domain.cancellation import PieceReport
from relhyp.domain.constants import ConstantsReport, LemmaReport
from relhyp.domain.covering import CoverReport
from relhyp.domain.errors import SchemaMismatch

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class BallResult(BaseModel):
    n: int
    rho_x: int
    vertices: int
    edges: int
    dump: str


class GeodesicResult(BaseModel):
    source: str
    target: str
    distance: int
    geodesics: list[str]
    capped: bool
    truncated: bool


class ComponentEntry(BaseModel):
    peripheral: int
    edges: list[int]
    start: str
    end: str
    isolated: bool


class ComponentsResult(BaseModel):
    path: str
    cyclic: bool
    components: list[ComponentEntry]
    connected_pairs: list[tuple[int, int]]


class ConstantsResult(BaseModel):
    constants: ConstantsReport
    checks: list[LemmaReport] = Field(default_factory=list)


class AreaResult(BaseModel):
    area: AreaReport | None = None
    linear_bound: LinearBoundReport | None = None


class CoverResult(BaseModel):
    mode: str
    report: CoverReport
    cells: list[list[str]]


RESULTS: dict[str, type[BaseModel]] = {
    "ball": BallResult,
    "geodesic": GeodesicResult,
    "components": ComponentsResult,
    "constants": ConstantsResult,
    "relarea": AreaResult,
    "cover": CoverResult,
    "sc-check": PieceReport,
}


class Envelope(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_id: str = Field(alias="schema")
    spec: str | None = None
    parameters: dict[str, Any] = Field(default_factory=dict)
    passed: bool = True
    result: dict[str, Any]

    @property
    def kind(self) -> str:
        return self.schema_id.removeprefix("relhyp.").rsplit("/", 1)[0]


def schema_id(kind: str) -> str:
    return f"relhyp.{kind}/{SCHEMA_VERSION}"


def dumps(envelope: Envelope) -> str:
    return json.dumps(envelope.model_dump(mode="json", by_alias=True), sort_keys=True, indent=2) + "\n"


def write_report(
    out_dir: str | Path,
    kind: str,
    result: BaseModel,
    parameters: dict[str, Any] | None = None,
    spec: str | None = None,
    passed: bool = True,
    name: str | None = None,
) -> Path:
    envelope = Envelope(
        schema=schema_id(kind),
        spec=spec,
        parameters=parameters or {},
        passed=passed,
        result=result.model_dump(mode="json"),
    )
    path = Path(out_dir) / f"{name or kind}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(envelope), encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def _field(e: ValidationError) -> str:
    loc = e.errors()[0].get("loc", ())
    return ".".join(str(part) for part in loc) or "<root>"


def read_report(path: str | Path) -> tuple[Envelope, BaseModel]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise SchemaMismatch(f"{path}: unreadable report: {e}", field="<root>") from e
    try:
        envelope = Envelope.model_validate(data)
    except ValidationError as e:
        raise SchemaMismatch(f"{path}: bad envelope field {_field(e)}", field=_field(e)) from e
    model = RESULTS.get(envelope.kind)
    if model is None or envelope.schema_id != schema_id(envelope.kind):
        raise SchemaMismatch(f"{path}: unknown schema {envelope.schema_id!r}", field="schema")
    try:
        result = model.model_validate(envelope.result)
    except ValidationError as e:
        field = f"result.{_field(e)}"
        raise SchemaMismatch(f"{path}: bad field {field}", field=field) from e
    return envelope, result


def json_schemas() -> dict[str, Any]:
    return {schema_id(kind): model.model_json_schema() for kind, model in sorted(RESULTS.items())}


def _rows(envelope: Envelope, result: BaseModel) -> list[tuple[str, str, str]]:
    """(check, bound, measured) rows for one report."""
    if isinstance(result, ConstantsResult):
        c = result.constants
        rows = [
            ("xi", f"clamped {c.xi:g}", f"{c.xi_hat:g}"),
            ("L", f"clamped {c.L:g}", f"{c.L_hat:g}"),
            ("rho", "6 L xi^2", f"{c.rho:g}"),
            ("mu", f"|g|_X <= {int(c.rho)}", str(c.mu)),
        ]
        rows += [(f"eps({s})", "", f"{v:g}") for s, v in sorted(c.eps.items())]
        if c.diverging:
            rows.append(("divergence", "bounded ratio", "diverging"))
        rows += [(chk.check, "no violations", str(len(chk.violations))) for chk in result.checks]
        return rows
    if isinstance(result, CoverResult):
        r = result.report
        rows = [("coverage", "all", "yes" if r.covered else "no")]
        rows.append(("mesh", "" if r.mesh_bound is None else f"<= {r.mesh_bound}", str(r.mesh)))
        if r.center_radius is not None:
            rows.append(("center radius", "" if r.center_bound is None else f"<= {r.center_bound}",
                         str(r.center_radius)))
        bound = "" if r.multiplicity_bound is None else f"<= {r.multiplicity_bound}"
        rows.append((f"multiplicity@{r.scale}", bound, str(r.multiplicity)))
        return rows
    if isinstance(result, AreaResult):
        rows = []
        if result.area is not None:
            rows.append(("area", f"k <= {result.area.cap_k}", str(result.area.area)))
        if result.linear_bound is not None:
            lb = result.linear_bound
            rows.append(("area/length", f"<= {lb.L:g}", f"{lb.max_ratio:g}"))
        return rows
    if isinstance(result, PieceReport):
        return [("piece fraction", f"< {result.lam}", result.fraction)]
    if isinstance(result, BallResult):
        return [("vertices", "", str(result.vertices)), ("edges", "", str(result.edges))]
    if isinstance(result, GeodesicResult):
        return [("distance", "", str(result.distance)), ("geodesics", "", str(len(result.geodesics)))]
    if isinstance(result, ComponentsResult):
        return [("components", "", str(len(result.components)))]
    return []


def render_report(paths: list[str | Path]) -> str:
    """Plain-text table of every check in the given report files."""
    rows: list[tuple[str, str, str, str, str]] = []
    for path in paths:
        envelope, result = read_report(path)
        status = "ok" if envelope.passed else "FAIL"
        for check, bound, measured in _rows(envelope, result):
            rows.append((envelope.kind, check, bound, measured, status))
    if not rows:
        return ""
    header = ("report", "check", "bound", "measured", "status")
    widths = [max(len(row[i]) for row in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in [header, *rows]]
    return "\n".join(lines) + "\n"
