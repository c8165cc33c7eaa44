import argparse
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import config
from command_router import COMMANDS, route_and_process
from errors import ConfigError, GapDefectError, PotentialError
from gapcount import CountParams
from potential import PotentialSpec, load_spec
from utils_formatting import OutputFormat

EXIT_OK = 0
EXIT_DIAGNOSTIC = 1
EXIT_USAGE = 2

# Subcommands that read a potential file
_NEEDS_POTENTIAL = {"bands", "gaps", "evans-scan", "roots", "count", "oracle-verify"}


@dataclass(frozen=True)
class RunConfig:
    """Everything one invocation needs; built from the command line and validated strictly."""

    command: str
    config_path: str | None = None
    output_format: str = OutputFormat.JSON
    output: str | None = None
    tol: float = config.TOL
    scan_step: float = config.SCAN_STEP
    edge_tol: float = config.EDGE_TOL
    root_tol: float = config.ROOT_TOL
    boundary_tol: float = 1e-6
    grid_n: int = config.ROOT_GRID_N
    n_grid: int = config.BOX_N_GRID
    e_min: float | None = None
    e_max: float | None = None
    n_samples: int = 1000
    j_lo: int = 0
    j_hi: int = 0
    run_oracle: bool = False
    quadratic: Tuple[int, int, int] | None = None
    branch: int = 1
    real: str | None = None
    j: int = 11
    j_max: int = 36
    k_max: int = 8
    delta: float = 0.1
    A: float = 40.0
    a_choice: str = "phi"
    nk: Tuple[int, ...] = ()
    k_lo: int = 0
    k_hi: int = 2

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown subcommand {self.command!r}")
        if self.output_format not in OutputFormat.ALL:
            raise ConfigError(f"output format must be one of {OutputFormat.ALL}, got {self.output_format!r}")
        for name in ("tol", "scan_step", "edge_tol", "root_tol", "boundary_tol", "delta", "A"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("grid_n", "n_grid", "n_samples", "j_max", "k_max"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.j_lo < 0 or self.j_hi < self.j_lo:
            raise ConfigError(f"bad gap index range [{self.j_lo}, {self.j_hi}]")
        if self.k_lo < 0 or self.k_hi <= self.k_lo:
            raise ConfigError(f"bad orbit term range [{self.k_lo}, {self.k_hi})")
        if self.command in _NEEDS_POTENTIAL:
            if not self.config_path:
                raise ConfigError(f"'{self.command}' needs --config PATH")
            if not Path(self.config_path).is_file():
                raise ConfigError(f"potential file {self.config_path} does not exist")
        if self.command == "diophantine" and (self.quadratic is None) == (self.real is None):
            raise ConfigError("diophantine needs exactly one of --quadratic or --real")

    def load_potential(self) -> PotentialSpec:
        try:
            return load_spec(self.config_path)
        except PotentialError as e:
            raise ConfigError(str(e)) from e

    def count_params(self) -> CountParams:
        return CountParams(
            scan_step=self.scan_step,
            edge_tol=self.edge_tol,
            boundary_tol=self.boundary_tol,
            grid_n=self.grid_n,
            root_tol=self.root_tol,
            tol=self.tol,
            run_oracle=self.run_oracle,
            oracle_n_grid=self.n_grid,
            diagnostic_dir=config.DIAGNOSTIC_DIR,
        )

    def header(self) -> Dict[str, Any]:
        """Physics-relevant tolerances in effect, reported with every output."""
        out = {k: v for k, v in asdict(self).items() if k not in ("output", "output_format")}
        out["shear_tol"] = config.SHEAR_TOL
        out["quad_tol"] = config.QUAD_TOL
        out["scan_phase_step"] = config.SCAN_PHASE_STEP
        return out


def _int_triple(text: str) -> Tuple[int, int, int]:
    try:
        n1, n2, n3 = (int(part) for part in text.split(","))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected n1,n2,n3 integers, got {text!r}") from e
    return n1, n2, n3


def _int_list(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", dest="config_path", help="potential JSON file")
    common.add_argument("--format", dest="output_format", choices=OutputFormat.ALL)
    common.add_argument("--output", help="write data here instead of standard output")
    common.add_argument("--tol", type=float, default=config.TOL)
    common.add_argument("--scan-step", type=float, default=config.SCAN_STEP)
    common.add_argument("--edge-tol", type=float, default=config.EDGE_TOL)

    ranged = argparse.ArgumentParser(add_help=False)
    ranged.add_argument("--jlo", dest="j_lo", type=int, default=None)
    ranged.add_argument("--jhi", dest="j_hi", type=int, default=None)
    ranged.add_argument("--gap", type=int, default=None, help="single gap index (sets --jlo and --jhi)")
    ranged.add_argument("--grid-n", type=int, default=config.ROOT_GRID_N)
    ranged.add_argument("--root-tol", type=float, default=config.ROOT_TOL)

    parser = argparse.ArgumentParser(
        prog="gapdefect", description="Defect eigenvalues in the spectral gaps of a periodic Schrodinger operator"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    bands = sub.add_parser("bands", parents=[common], help="discriminant k(E) on an energy grid (CSV)")
    bands.add_argument("--emin", dest="e_min", type=float, default=None)
    bands.add_argument("--emax", dest="e_max", type=float, required=True)
    bands.add_argument("--samples", dest="n_samples", type=int, default=1000)

    gaps = sub.add_parser("gaps", parents=[common], help="spectral gaps below --emax (JSON)")
    gaps.add_argument("--emax", dest="e_max", type=float, required=True)

    sub.add_parser("evans-scan", parents=[common, ranged], help="Evans function across one gap (CSV)")
    sub.add_parser("roots", parents=[common, ranged], help="Evans roots per gap (JSON)")

    for name, text in (("count", "eigenvalue counts with bounds (JSON, or CSV summary)"),
                       ("oracle-verify", "Evans counts against the box oracle")):
        p = sub.add_parser(name, parents=[common, ranged], help=text)
        p.add_argument("--boundary-tol", type=float, default=1e-6)
        p.add_argument("--n-grid", type=int, default=config.BOX_N_GRID)
        if name == "count":
            p.add_argument("--oracle", dest="run_oracle", action="store_true")

    dio = sub.add_parser("diophantine", parents=[common], help="F_a, exceptional orbits and residual tables (JSON)")
    source = dio.add_mutually_exclusive_group(required=True)
    source.add_argument("--quadratic", type=_int_triple, help="n1,n2,n3: a is a root of n1 x^2 + n2 x + n3")
    source.add_argument("--real", help="decimal or sympy expression for a")
    dio.add_argument("--branch", type=int, default=1, choices=(1, -1))
    dio.add_argument("--j", type=int, default=11)
    dio.add_argument("--jmax", dest="j_max", type=int, default=36)
    dio.add_argument("--kmax", dest="k_max", type=int, default=8)
    dio.add_argument("--delta", type=float, default=0.1)

    kp = sub.add_parser("example-kp", parents=[common], help="Kronig-Penney worked example (JSON)")
    kp.add_argument("--A", dest="A", type=float, default=40.0)
    kp.add_argument("--a", dest="a_choice", default="phi", help="'phi', 'sqrt2' or n1,n2,n3")
    kp.add_argument("--j", type=int, default=11)
    kp.add_argument("--nk", type=_int_list, default=(), help="gap indices to count (default: orbit terms)")
    kp.add_argument("--kmin", dest="k_lo", type=int, default=0)
    kp.add_argument("--kmax", dest="k_hi", type=int, default=2)
    kp.add_argument("--grid-n", type=int, default=config.ROOT_GRID_N)
    kp.add_argument("--n-grid", type=int, default=config.BOX_N_GRID)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {k: v for k, v in vars(args).items() if v is not None}
    gap = values.pop("gap", None)
    if gap is not None:
        values["j_lo"] = values["j_hi"] = gap
    if "j_lo" in values and "j_hi" not in values:
        values["j_hi"] = values["j_lo"]
    if "output_format" not in values:
        csv_first = args.command in ("bands", "evans-scan")
        values["output_format"] = OutputFormat.CSV if csv_first else OutputFormat.JSON
    return RunConfig(**values)


def _write(cfg: RunConfig, payload: str) -> None:
    if cfg.output:
        Path(cfg.output).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.output).write_text(payload)
    else:
        sys.stdout.write(payload)


def run(argv: Sequence[str] | None = None) -> int:
    """Parse argv, run one subcommand and return its exit code (0 ok, 1 diagnostics failed, 2 usage)."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        cfg = config_from_args(args)
    except (ConfigError, TypeError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE

    print(f"🚀 gapdefect {cfg.command}", file=sys.stderr)
    try:
        success, payload = route_and_process(cfg)
    except ConfigError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE
    except GapDefectError as e:
        print(f"❌ {cfg.command} failed: {e}", file=sys.stderr)
        return EXIT_DIAGNOSTIC

    _write(cfg, payload)
    if not success:
        print(f"❌ {cfg.command}: diagnostics failed (see messages above)", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    print(f"✅ {cfg.command} done", file=sys.stderr)
    return EXIT_OK


def main(argv: List[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
