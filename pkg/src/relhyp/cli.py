import argparse
import json
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field

from relhyp.domain.area import AreaReport, RelPresentation, check_linear_bound, search_area
from relhyp.domain.cancellation import RelatorFamily, check_Cprime
from relhyp.domain.cayley import Path as RelPath
from relhyp.domain.cayley import are_connected, build_window, components, is_isolated, rel_geodesics
from relhyp.domain.constants import (
    DEFAULT_CONTROL_GAP,
    ConstantsReport,
    check_lemma_lc,
    check_lemma_xi,
    estimate_constants,
)
from relhyp.domain.covering import Covering, assemble, cover_graph_annuli, cover_rel_ball
from relhyp.domain.errors import (
    BoundExceeded,
    CapExceeded,
    ConfigParse,
    InvalidLetter,
    MixedSpecs,
    NotOnSides,
    NotSeparated,
    NotTrivialInG,
    OutOfRange,
    RelhypError,
    SchemaMismatch,
    SeparationFailed,
    UnknownGenerator,
    UnknownPeripheral,
    UnsupportedFamily,
    UnsupportedPeripheral,
    WindowTooLarge,
    WindowTooSmall,
)
from relhyp.domain.group import GroupSpec
from relhyp.repository.report import (
    AreaResult,
    BallResult,
    ComponentEntry,
    ComponentsResult,
    ConstantsResult,
    CoverResult,
    GeodesicResult,
    json_schemas,
    read_report,
    render_report,
    write_report,
)
from relhyp.repository.repository import GroupSpecFinder, GroupSpecRepository

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_CAP = 3
EXIT_ERROR = 4

EXIT_CODES: list[tuple[tuple[type[RelhypError], ...], int]] = [
    (
        (
            ConfigParse,
            SchemaMismatch,
            UnsupportedFamily,
            UnsupportedPeripheral,
            UnknownGenerator,
            UnknownPeripheral,
            InvalidLetter,
            MixedSpecs,
            NotOnSides,
            NotTrivialInG,
            OutOfRange,
            WindowTooSmall,
        ),
        EXIT_CONFIG,
    ),
    ((WindowTooLarge, CapExceeded, BoundExceeded), EXIT_CAP),
    ((NotSeparated, SeparationFailed), EXIT_VIOLATION),
]

OUTPUT_ENV = "RELHYP_OUTPUT_DIR"


class RunConfig(BaseModel):
    command: str
    spec: str | None = None
    out_dir: str = "reports"
    parameters: dict[str, Any] = Field(default_factory=dict)


def exit_code(e: RelhypError) -> int:
    for classes, code in EXIT_CODES:
        if isinstance(e, classes):
            return code
    return EXIT_ERROR


def _load_spec(config: RunConfig) -> GroupSpec:
    location = config.spec or GroupSpecFinder(root_dir=os.getcwd()).find()
    if location is None:
        raise ConfigParse("no --spec given and no group.yaml found in the current directory")
    return GroupSpecRepository(location).read()


def _cover_cells(spec: GroupSpec, cov: Covering) -> list[list[str]]:
    return [sorted((spec.format_element(g) for g in c.elements), key=lambda s: (len(s), s)) for c in cov.cells]


def _run_ball(config: RunConfig, spec: GroupSpec) -> int:
    p = config.parameters
    window = build_window(spec, p["n"], p["rho_x"], max_vertices=p["max_vertices"])
    result = BallResult(
        n=window.n,
        rho_x=window.rho_x,
        vertices=len(window),
        edges=window.graph.number_of_edges(),
        dump=window.dump(),
    )
    write_report(config.out_dir, "ball", result, p, config.spec)
    print(f"{result.vertices} vertices, {result.edges} edges")
    return EXIT_OK


def _run_geodesic(config: RunConfig, spec: GroupSpec) -> int:
    p = config.parameters
    window = build_window(spec, p["n"], p["rho_x"], max_vertices=p["max_vertices"])
    g, h = spec.normal_form(p["source"]), spec.normal_form(p["target"])
    search = rel_geodesics(window, g, h, cap=p["cap"], strict=False)
    result = GeodesicResult(
        source=spec.format_element(g),
        target=spec.format_element(h),
        distance=search.distance,
        geodesics=[path.format() for path in search.paths],
        capped=search.capped,
        truncated=search.truncated,
    )
    write_report(config.out_dir, "geodesic", result, p, config.spec)
    for line in result.geodesics:
        print(line)
    return EXIT_OK


def _run_components(config: RunConfig, spec: GroupSpec) -> int:
    p = config.parameters
    path = RelPath.from_word(spec, p["word"])
    comps = components(path, cyclic=p["cyclic"])
    entries = [
        ComponentEntry(
            peripheral=c.peripheral,
            edges=list(c.edges),
            start=spec.format_element(c.start_vertex),
            end=spec.format_element(c.end_vertex),
            isolated=is_isolated(c, comps),
        )
        for c in comps
    ]
    pairs = [(i, j) for i in range(len(comps)) for j in range(i + 1, len(comps)) if are_connected(comps[i], comps[j])]
    result = ComponentsResult(path=path.format(), cyclic=p["cyclic"], components=entries, connected_pairs=pairs)
    write_report(config.out_dir, "components", result, p, config.spec)
    print(f"{len(entries)} components, {len(pairs)} connected pairs")
    return EXIT_OK


def _run_constants(config: RunConfig, spec: GroupSpec) -> int:
    p = config.parameters
    window = build_window(spec, p["n"], p["rho_x"], max_vertices=p["max_vertices"])
    control = None
    if p["control_rho_x"] is not None and p["control_rho_x"] < window.rho_x:
        control = build_window(spec, p["n"], p["control_rho_x"], max_vertices=p["max_vertices"])
    report = estimate_constants(
        window,
        side_cap=p["side_cap"],
        cycle_len_cap=p["cycle_len_cap"],
        scales=tuple(p["scales"]),
        control=control,
        control_gap=None if p["no_control"] else DEFAULT_CONTROL_GAP,
    )
    checks = []
    if p["check"]:
        for s in p["scales"]:
            checks.append(check_lemma_lc(window, s, report.L, report.eps[s]))
        checks.append(check_lemma_xi(window, report.L, report.xi, side_cap=p["side_cap"]))
    violated = any(not c.passed for c in checks)
    if p["expect_divergence"]:
        passed = report.diverging
    else:
        passed = not report.diverging and not violated
    write_report(config.out_dir, "constants", ConstantsResult(constants=report, checks=checks), p, config.spec, passed)
    print(f"xi_hat={report.xi_hat:g} L_hat={report.L_hat:g} rho={report.rho:g} mu={report.mu}")
    if report.divergence_threshold is not None:
        print(
            f"control rho_x={report.control_rho_x} L_hat={report.control_L_hat:g} "
            f"divergence threshold m > {report.divergence_threshold:g}"
        )
    if report.verdict:
        print(report.verdict)
    return EXIT_OK if passed else EXIT_VIOLATION


def _run_relarea(config: RunConfig, spec: GroupSpec) -> int:
    p = config.parameters
    pres = RelPresentation.from_spec(spec, link_generators=p["link_generators"])
    area: AreaReport | None = None
    if p["word"]:
        area = search_area(pres, p["word"], cap_k=p["cap_k"], cap_len=p["cap_len"])
        print(f"area {area.area if area.area is not None else 'unknown'}")
    bound = None
    if p["samples"]:
        bound = check_linear_bound(pres, p["samples"], p["L"], cap_k=p["cap_k"])
        print(f"max area/length {bound.max_ratio:g}")
    passed = bound is None or bound.passed
    write_report(config.out_dir, "relarea", AreaResult(area=area, linear_bound=bound), p, config.spec, passed)
    return EXIT_OK if passed else EXIT_VIOLATION


def _load_constants(path: str) -> ConstantsReport:
    _, result = read_report(path)
    if not isinstance(result, ConstantsResult):
        raise SchemaMismatch(f"{path} is not a constants report", field="schema")
    return result.constants


def _run_cover(config: RunConfig, spec: GroupSpec) -> int:
    p = config.parameters
    window = build_window(spec, p["window_n"], p["rho_x"], max_vertices=p["max_vertices"])
    if p["constants"]:
        constants = _load_constants(p["constants"])
    else:
        constants = estimate_constants(window, cycle_len_cap=p["cycle_len_cap"], scales=(p["s"],))
    mode = p["mode"]
    try:
        if mode == "graph":
            cov, report = cover_graph_annuli(window, p["r"], constants)
        elif mode == "relball":
            cov, report = cover_rel_ball(window, p["window_n"], p["s"], constants)
        else:
            cov, report = assemble(
                window, p["r"], p["R"] or 2 * p["r"], constants, c=p["c"], max_vertices=p["max_vertices"]
            )
    except SeparationFailed as e:
        print(f"separation failed: {e} (witness {e.witness})", file=sys.stderr)
        return EXIT_VIOLATION
    result = CoverResult(mode=mode, report=report, cells=_cover_cells(spec, cov))
    write_report(config.out_dir, "cover", result, p, config.spec, report.passed, name=f"cover-{mode}")
    print(f"{report.cells} cells, mesh {report.mesh}, multiplicity {report.multiplicity}")
    return EXIT_OK if report.passed else EXIT_VIOLATION


def _run_sc_check(config: RunConfig) -> int:
    p = config.parameters
    family = RelatorFamily(n=p["n"], i_max=p["i_max"], alphabet_size=p["alphabet_size"])
    report = check_Cprime(family, Fraction(p["lambda"]))
    write_report(config.out_dir, "sc-check", report, p, None, report.satisfied)
    print(f"max piece fraction {report.fraction} ({'<' if report.satisfied else '>='} {report.lam})")
    return EXIT_OK if report.satisfied else EXIT_VIOLATION


def _run_report(config: RunConfig) -> int:
    p = config.parameters
    if p["schema"]:
        print(json.dumps(json_schemas(), sort_keys=True, indent=2))
        return EXIT_OK
    paths = list(p["paths"]) or sorted(str(x) for x in Path(config.out_dir).glob("*.json"))
    table = render_report(paths)
    if table:
        print(table, end="")
    return EXIT_OK


def run(config: RunConfig) -> int:
    if config.command == "sc-check":
        return _run_sc_check(config)
    if config.command == "report":
        return _run_report(config)
    spec = _load_spec(config)
    handlers = {
        "ball": _run_ball,
        "geodesic": _run_geodesic,
        "components": _run_components,
        "constants": _run_constants,
        "relarea": _run_relarea,
        "cover": _run_cover,
    }
    return handlers[config.command](config, spec)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relhyp",
    )

    # 引数・オプションの定義
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", type=str, help="group spec YAML path or https URL")
    common.add_argument("--out", type=str, default=os.environ.get(OUTPUT_ENV, "reports"))
    common.add_argument("--verbose", action="store_true")
    common.add_argument("--max-vertices", type=int, default=100_000)

    window = argparse.ArgumentParser(add_help=False)
    window.add_argument("--n", type=int, default=2)
    window.add_argument("--rho-x", type=int, default=4)

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ball", parents=[common, window])

    geodesic = sub.add_parser("geodesic", parents=[common, window])
    geodesic.add_argument("--source", type=str, default="")
    geodesic.add_argument("--target", type=str, required=True)
    geodesic.add_argument("--cap", type=int, default=1000)

    comps = sub.add_parser("components", parents=[common])
    comps.add_argument("--word", type=str, required=True)
    comps.add_argument("--cyclic", action="store_true")

    constants = sub.add_parser("constants", parents=[common, window])
    constants.add_argument("--side-cap", type=int)
    constants.add_argument("--cycle-len-cap", type=int, default=4)
    constants.add_argument("--scales", type=lambda v: [int(x) for x in v.split(",")], default=[0, 1, 2])
    constants.add_argument("--control-rho-x", type=int, help="control window X-radius (default: rho_x - 2)")
    constants.add_argument("--no-control", action="store_true", help="skip the control window")
    constants.add_argument("--check", action="store_true", help="also run the lemma checks")
    constants.add_argument("--expect-divergence", action="store_true")

    relarea = sub.add_parser("relarea", parents=[common])
    relarea.add_argument("--word", type=str)
    relarea.add_argument("--samples", type=str, nargs="*", default=[])
    relarea.add_argument("--L", type=float, default=1.0)
    relarea.add_argument("--cap-k", type=int, default=3)
    relarea.add_argument("--cap-len", type=int)
    relarea.add_argument("--link-generators", action="store_true")

    cover = sub.add_parser("cover", parents=[common])
    cover.add_argument("mode", choices=["graph", "relball", "assemble"])
    cover.add_argument("--r", type=int, default=1)
    cover.add_argument("--R", type=int)
    cover.add_argument("--s", type=int, default=4)
    cover.add_argument("--c", type=int, default=8)
    cover.add_argument("--window-n", type=int, default=2)
    cover.add_argument("--rho-x", type=int, default=4)
    cover.add_argument("--cycle-len-cap", type=int, default=4)
    cover.add_argument("--constants", type=str, help="constants report to reuse")

    sc = sub.add_parser("sc-check", parents=[common])
    sc.add_argument("--n", type=int, required=True)
    sc.add_argument("--i-max", type=int, default=12)
    sc.add_argument("--lambda", type=str, default="1/6")
    sc.add_argument("--alphabet-size", type=int, default=1)

    report = sub.add_parser("report", parents=[common])
    report.add_argument("paths", nargs="*")
    report.add_argument("--schema", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    parameters = {k: v for k, v in vars(args).items() if k not in ("command", "spec", "out", "verbose")}
    config = RunConfig(command=args.command, spec=args.spec, out_dir=args.out, parameters=parameters)
    try:
        return run(config)
    except RelhypError as e:
        code = exit_code(e)
        label = {EXIT_CONFIG: "configuration error", EXIT_CAP: "cap exceeded"}.get(code, "error")
        print(f"{label}: {type(e).__name__}: {e}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
