"""
Command line for Spectrum MDL
Each subcommand runs one stage on files; `run` chains them all
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from pydantic import ValidationError

from .config import (
    EXIT_CONFIG_ERROR,
    EXIT_INCOMPATIBLE,
    EXIT_OK,
    LOG_FORMAT,
    LOG_LEVEL,
    NULL_PERMUTATIONS,
)
from .errors import ConfigError, InvalidSpectrumError, MixedFamilyError, ResolutionError, StageError
from .models.domain import SpikingPattern
from .models.schemas import RunConfig
from .services.autoencoder_service import SpectrumVaeTrainer, build_model
from .services.dataset_service import gen_data, load_dataset, load_points, save_points, support_for
from .services.essence_service import essence_bounds, on_boundary_pairs
from .services.info_service import mutual_information, permutation_null
from .services.mdl_service import check_compatibility, description_length, sample_census, select_best
from .services.pipeline_service import info_bounds, run_pipeline
from .services.robustness_service import certify_pattern
from .utils import report_writer
from .utils.model_io import load_model, save_model

logger = logging.getLogger(__name__)


def _emit(payload: Dict[str, Any]) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def load_config(args: argparse.Namespace) -> RunConfig:
    """
    Run configuration from --config with command-line overrides applied

    Raises:
        ValidationError: If the file or an override is invalid
        ConfigError: If the config file is missing
    """
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        config = RunConfig.model_validate_json(path.read_text(encoding="utf-8"))
    else:
        config = RunConfig()

    overrides: Dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "U", None) is not None:
        overrides["U"] = args.U
    if getattr(args, "grid_res", None) is not None:
        overrides["essence"] = {**config.essence.model_dump(), "grid_res": args.grid_res}
    if not overrides:
        return config
    return RunConfig.model_validate({**config.model_dump(), **overrides})


def _support(args: argparse.Namespace, config: RunConfig):
    if getattr(args, "data", None):
        return support_for("custom", load_points(args.data))
    return support_for(getattr(args, "kind", None) or config.dataset.kind)


def cmd_gen_data(args: argparse.Namespace, config: RunConfig) -> int:
    kind = args.kind or config.dataset.kind
    n = args.n or config.dataset.n
    points = gen_data(kind, n, config.seed)
    path = save_points(args.out or f"{kind}_{n}_{config.seed}.csv", points)
    _emit({"path": str(path), "n_points": len(points), "dimension": points.shape[1]})
    return EXIT_OK


def cmd_train(args: argparse.Namespace, config: RunConfig) -> int:
    points = load_points(args.data) if args.data else load_dataset(config.dataset, config.seed)
    model = build_model(
        config.model.spectrum_params(), points.shape[1], config.model.encoder_hidden,
        config.model.decoder_hidden, config.model.hidden_activation, config.seed
    )
    trainer = SpectrumVaeTrainer(config.train.model_copy(update={"seed": config.seed}))
    model = trainer.train(model, points)
    path = save_model(model, args.out or f"model_{config.seed}.json")
    _emit({
        "path": str(path),
        "epoch_losses": trainer.history.epoch_losses,
        "initial_mean_error": trainer.history.initial_mean_error,
        "final_mean_error": trainer.history.final_mean_error,
    })
    return EXIT_OK


def cmd_census(args: argparse.Namespace, config: RunConfig) -> int:
    model = load_model(args.model)
    observed = sample_census(model, load_points(args.data))
    if args.out:
        report_writer.write_census(args.out, observed)
    _emit(report_writer.census_summary(observed))
    return EXIT_OK


def cmd_certify(args: argparse.Namespace, config: RunConfig) -> int:
    model = load_model(args.model)
    pattern = SpikingPattern.parse(args.pattern)
    if not pattern.fits(model.params.K):
        raise ConfigError(f"Pattern {pattern} does not fit K={model.params.K}")
    bound = args.bound if args.bound is not None else config.U / 2
    record = certify_pattern(model.decode_batch, pattern, bound, config.certification, model.params)
    _emit({
        "pattern": pattern.label,
        "bound": bound,
        "certified_complexity_upper_bound": report_writer.number(record.value),
        "certificate": report_writer.certificate_summary(record.certificate),
    })
    return EXIT_OK


def cmd_mdl(args: argparse.Namespace, config: RunConfig) -> int:
    points = load_points(args.data)
    candidates = []
    for path in args.model:
        model = load_model(path)
        compatibility = check_compatibility(model, points, config.compatibility())
        dl = description_length(model, points, config.U, config.certification, compatibility.census)
        candidates.append((compatibility, dl))
    selection = select_best(candidates)
    if args.out:
        report_writer.write_complexity(args.out, candidates[selection.index if selection.found else 0][1])
    _emit({
        "candidates": [
            {
                "model": str(path),
                "compatibility": report_writer.compatibility_summary(compatibility),
                "achieved_description_length": report_writer.description_length_summary(dl),
            }
            for path, (compatibility, dl) in zip(args.model, candidates)
        ],
        "selected": str(args.model[selection.index]) if selection.found else None,
    })
    return EXIT_OK if selection.found else EXIT_INCOMPATIBLE


def cmd_essence(args: argparse.Namespace, config: RunConfig) -> int:
    eb = essence_bounds(
        _support(args, config), config.U, config.grid_res, config.seed,
        config.essence.packing_restarts
    )
    if args.out:
        report_writer.write_points_table(args.out, eb.cover_points, ["cover"] * eb.upper)
    _emit(report_writer.essence_summary(eb))
    return EXIT_OK


def cmd_boundary(args: argparse.Namespace, config: RunConfig) -> int:
    model = load_model(args.model)
    support = _support(args, config)
    eb = essence_bounds(support, config.U, config.grid_res, config.seed, config.essence.packing_restarts)
    report = on_boundary_pairs(model, eb, config.U)
    if args.out:
        report_writer.write_boundary_pairs(args.out, report, support.D)
    _emit({"threshold": report.threshold, "pair_count": report.pair_count})
    return EXIT_OK


def cmd_info(args: argparse.Namespace, config: RunConfig) -> int:
    model = load_model(args.model)
    points = load_points(args.data)
    reconstructed = model.decode_batch(model.encode_batch(points))
    support = support_for(args.kind) if args.kind else support_for("custom", points)
    bounds = info_bounds(support)
    bins = args.bins or config.info_bins
    report = mutual_information(points, reconstructed, bounds, bins)
    null_mean, null_std = permutation_null(points, reconstructed, bounds, bins, args.permutations, config.seed)
    if args.out:
        report_writer.write_info(args.out, report)
    _emit(report_writer.info_summary(report, null_mean, null_std))
    return EXIT_OK


def cmd_run(args: argparse.Namespace, config: RunConfig) -> int:
    manifest = run_pipeline(config, Path(args.out) if args.out else None)
    _emit({"output_dir": str(manifest.output_dir), "exit_code": manifest.exit_code})
    return manifest.exit_code


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Run configuration JSON file")
    common.add_argument("--seed", type=int, help="Override the configured seed")
    common.add_argument("--out", help="Output file or run directory")
    common.add_argument("--log-level", default=LOG_LEVEL, help="Logging level (default from SPECTRUM_MDL_LOG_LEVEL)")

    parser = argparse.ArgumentParser(
        prog="spectrum_mdl",
        description="Spectrum VAE description-length toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="Sample points from a demo support")
    p.add_argument("--kind", choices=["two-circles", "ring"])
    p.add_argument("--n", type=int)
    p.set_defaults(handler=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="Train one model")
    p.add_argument("--data", help="Point CSV (default: the configured dataset)")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("census", parents=[common], help="Count spiking patterns of encoded points")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(handler=cmd_census)

    p = sub.add_parser("certify", parents=[common], help="Search and certify a box for one pattern")
    p.add_argument("--model", required=True)
    p.add_argument("--pattern", required=True, help="Pattern label such as {2,3}")
    p.add_argument("--bound", type=float, help="Allowed output deviation (default U/2)")
    p.add_argument("--U", type=float)
    p.set_defaults(handler=cmd_certify)

    p = sub.add_parser("mdl", parents=[common], help="Compatibility and description length of candidate models")
    p.add_argument("--model", required=True, action="append", help="Model file; repeat for several candidates")
    p.add_argument("--data", required=True)
    p.add_argument("--U", type=float)
    p.set_defaults(handler=cmd_mdl)

    for name, handler, helptext in (
        ("essence", cmd_essence, "Packing and cover bounds of a support"),
        ("boundary", cmd_boundary, "On-boundary pairs among cover points"),
    ):
        p = sub.add_parser(name, parents=[common], help=helptext)
        if name == "boundary":
            p.add_argument("--model", required=True)
        p.add_argument("--kind", choices=["two-circles", "ring"])
        p.add_argument("--data", help="Point CSV used as an empirical support")
        p.add_argument("--U", type=float)
        p.add_argument("--grid-res", type=float)
        p.set_defaults(handler=handler)

    p = sub.add_parser("info", parents=[common], help="Entropy and mutual information of reconstructions")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--kind", choices=["two-circles", "ring"], help="Use the bounds of a demo support")
    p.add_argument("--bins", type=int)
    p.add_argument("--permutations", type=int, default=NULL_PERMUTATIONS)
    p.set_defaults(handler=cmd_info)

    p = sub.add_parser("run", parents=[common], help="Run the whole pipeline")
    p.set_defaults(handler=cmd_run)
    return parser


CONFIG_FAILURES = (ConfigError, ValidationError, ResolutionError, MixedFamilyError, InvalidSpectrumError)


def _is_config_failure(error: BaseException) -> bool:
    while error is not None:
        if isinstance(error, CONFIG_FAILURES):
            return True
        error = error.__cause__
    return False


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format=LOG_FORMAT)
    try:
        config = load_config(args)
        return args.handler(args, config)
    except CONFIG_FAILURES as e:
        logger.error("configuration error: %s", e)
        return EXIT_CONFIG_ERROR
    except StageError as e:
        if _is_config_failure(e):
            logger.error("configuration error in stage %s: %s", e.stage, e)
            return EXIT_CONFIG_ERROR
        raise


if __name__ == "__main__":
    sys.exit(main())
