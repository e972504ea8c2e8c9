import argparse
import json
import logging
import sys
from typing import List, Optional

from stt.core.config import Settings
from stt.core.exceptions import ConfigurationException
from stt.core.logging_config import setup_logging
from stt.handlers.exception_handlers import EXIT_ASSERTION, EXIT_OK, with_exit_codes
from stt.schemas.scenario import ScenarioConfig, SquareTrajectory, load_scenario
from stt.services.export import export
from stt.services.harness import HarnessService
from stt.services.verification import VerificationService
from stt.utils.seeding import effective_seed

logger = logging.getLogger(__name__)


def _add_common(parser: argparse.ArgumentParser, trials: bool = True):
    parser.add_argument("--config", help="Scenario JSON file (defaults apply when omitted)")
    parser.add_argument("--seed", type=int, help="Master seed; derived from the config hash when omitted")
    parser.add_argument("--out", help="Output path, stdout when omitted")
    parser.add_argument("--format", choices=("csv", "json"), default="json")
    if trials:
        parser.add_argument("--trials", type=int, default=100)
        parser.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stt", description="Distributed bearing-only motion estimation simulator")
    parser.add_argument("--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    parser.add_argument("--log-file")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Run one trial and emit its trace")
    _add_common(simulate, trials=False)
    simulate.add_argument("--trial-index", type=int, default=0)

    montecarlo = sub.add_parser("montecarlo", help="Pooled RMSE over many trials")
    _add_common(montecarlo)

    sweep = sub.add_parser("sweep-noise", help="Steady-state RMSE against noise level")
    _add_common(sweep)
    sweep.add_argument("--parameter", choices=("bearing_sigma", "position_sigma"), default="bearing_sigma")
    sweep.add_argument("--sigmas", type=float, nargs="+")
    sweep.add_argument("--check", action="store_true", help="Exit 1 unless Spearman rho > 0.9")

    comp = sub.add_parser("compare", help="STT against the CKF and PLKF baselines")
    _add_common(comp)
    comp.add_argument("--check", action="store_true",
                      help="Exit 1 unless STT beats PLKF and stays within 2x of CKF")

    verify = sub.add_parser("verify", help="Run the convergence-theory checks")
    verify.add_argument("checks", nargs="*", default=["all"])
    verify.add_argument("--seed", type=int)
    verify.add_argument("--out")
    verify.add_argument("--format", choices=("csv", "json"), default="json")

    sub.add_parser("schema", help="Print the scenario config JSON schema")
    return parser


def _scenario(args, default: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    if args.config:
        return load_scenario(args.config)
    return default or ScenarioConfig()


def _seed(args, cfg: ScenarioConfig) -> int:
    return effective_seed(args.seed, cfg.seed, cfg.canonical())


def _require_trials(trials: int):
    if trials < 1:
        raise ConfigurationException(f"--trials must be >= 1, got {trials}")


@with_exit_codes
def run(args: argparse.Namespace, settings: Settings) -> int:
    if args.command == "schema":
        print(json.dumps(ScenarioConfig.model_json_schema(), indent=2))
        return EXIT_OK

    if args.command == "verify":
        seed = args.seed if args.seed is not None else effective_seed(None, None, ScenarioConfig().canonical())
        report = VerificationService().verify(args.checks, seed=seed)
        export(report, args.format, args.out)
        return EXIT_OK if report.passed else EXIT_ASSERTION

    if args.command == "sweep-noise":
        cfg = _scenario(args, ScenarioConfig(trajectory=SquareTrajectory()))
    else:
        cfg = _scenario(args)
    seed = _seed(args, cfg)
    logger.info("%s: seed %d", args.command, seed)
    service = HarnessService(settings)

    if args.command == "simulate":
        trace = service.run_trial(cfg, seed, args.trial_index)
        export(trace, args.format, args.out, seed=seed)
        return EXIT_OK

    _require_trials(args.trials)
    if args.command == "montecarlo":
        report = service.monte_carlo(cfg, args.trials, seed)
        export(report, args.format, args.out)
        return EXIT_OK

    if args.command == "sweep-noise":
        report = service.sweep_noise(cfg, args.trials, seed, args.parameter, args.sigmas)
        export(report, args.format, args.out)
        if args.check and not (report.spearman_rho is not None and report.spearman_rho > 0.9):
            logger.warning("Noise sweep trend check failed: spearman=%s", report.spearman_rho)
            return EXIT_ASSERTION
        return EXIT_OK

    report = service.compare(cfg, args.trials, seed)
    export(report, args.format, args.out)
    if args.check and not ordering_holds(report):
        return EXIT_ASSERTION
    return EXIT_OK


def ordering_holds(report) -> bool:
    stt = report.reports["stt"].steady_state
    ckf = report.reports["ckf"].steady_state
    plkf = report.reports["plkf"].steady_state
    if stt is None:
        return False
    holds = (
        stt.position_mean < plkf.position_mean
        and stt.velocity_mean < plkf.velocity_mean
        and stt.position_mean <= 2.0 * ckf.position_mean
        and stt.velocity_mean <= 2.0 * ckf.velocity_mean
    )
    if not holds:
        logger.warning("Estimator ordering check failed: stt=%s ckf=%s plkf=%s", stt, ckf, plkf)
    return holds


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = Settings(
        log_level=args.log_level,
        log_file=args.log_file,
        workers=max(1, getattr(args, "workers", 1)),
    )
    setup_logging(settings.log_level, settings.log_file)
    return run(args, settings)


if __name__ == "__main__":
    sys.exit(main())
