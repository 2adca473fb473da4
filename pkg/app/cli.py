"""
Command-line interface.

Subcommands: fit, sample, budget, tune, analyze, simulate. Every run writes
run_metadata.json next to its outputs. Exit codes: 0 success, 1 usage,
2 data or validation error, 3 evaluator failure.
"""

import argparse
import logging
import sys
from typing import Any, Dict, Optional, Sequence, Tuple

import pandas as pd
from pydantic import ValidationError

import app
from app.core.config import AppConfig, TuningDefaults, get_settings, load_app_config
from app.core.errors import CopulaTuneError, UsageError
from app.core.logging import setup_logging
from app.models.budget import BudgetInputs, BudgetReport
from app.models.copula import ConditionSpec, CopulaModel
from app.models.dataset import Dataset
from app.models.run import RunConfig
from app.models.space import ParameterSpace
from app.services.budget import effective_ideal_count, estimate_budget, min_budget, probability_curve
from app.services.copula import GaussianCopula, fit_copula
from app.services.dataset import analyze, filter_report, load_csv, load_many, quantile_filter
from app.services.evaluators import Evaluator, ShellEvaluator, SyntheticEvaluator
from app.services.landscapes import get_landscape
from app.services.reporting import ReportWriter, curve_frame
from app.services.simulation import Simulator, trajectories
from app.services.tuner import Tuner, task_argument
from app.services.tuning_space import serialize_configuration, space_summary

logger = logging.getLogger(__name__)

MODEL_FILE = "model.json"


class ArgumentParser(argparse.ArgumentParser):
    """argparse parser whose usage errors raise UsageError (exit code 1)."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _budget_value(text: str) -> str:
    if text == "auto":
        return text
    try:
        int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"budget must be an integer or 'auto', got {text!r}")
    return text


def build_parser() -> ArgumentParser:
    """Argument parser for all subcommands."""
    parser = ArgumentParser(prog="copulatune", description="Gaussian-copula transfer autotuning")
    parser.add_argument("--version", action="version", version=f"%(prog)s {app.__version__}")
    parser.add_argument("--config", help="YAML configuration file (default: config/config.yaml if present)")
    parser.add_argument("--log-level", help="Logging level (overrides the configuration file)")
    parser.add_argument("--log-file", help="Also write logs to this file")

    sub = parser.add_subparsers(dest="subcommand", parser_class=ArgumentParser)
    sub.required = True

    def common(p: ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=0, help="Random seed")
        p.add_argument("--output-dir", "-o", help="Output directory (env COPULATUNE_OUTPUT_DIR)")

    def knobs(p: ArgumentParser) -> None:
        p.add_argument("--confidence", type=float, help="Required P(>=1 ideal candidate)")
        p.add_argument("--ideal-fraction", type=float, help="Share of candidates considered ideal")
        p.add_argument("--ideal-count", type=int, help="Explicit ideal candidate count")
        p.add_argument("--allowance", type=float, help="Pruned-optimal allowance")
        p.add_argument("--trials", type=int, help="Draws used to estimate the model's support")

    fit = sub.add_parser("fit", help="Filter source data and fit a copula model")
    fit.add_argument("--space", required=True, help="Space schema (YAML or JSON)")
    fit.add_argument("--data", nargs="+", required=True, help="Source dataset CSV files")
    fit.add_argument("--quantile", type=float, help="Share of best records kept per task")
    common(fit)

    sample = sub.add_parser("sample", help="Draw conditional samples from a model")
    sample.add_argument("--model", required=True, help="Model file")
    sample.add_argument("--target", type=float, required=True, help="Target task value")
    sample.add_argument("--samples", "-n", type=int, required=True, help="Unique samples wanted")
    common(sample)

    budget = sub.add_parser("budget", help="Estimate the few-shot evaluation budget")
    budget.add_argument("--model", help="Model file (with --target)")
    budget.add_argument("--target", type=float, help="Target task value")
    budget.add_argument("--full", type=int, help="|C|, size of the whole space")
    budget.add_argument("--effective", type=int, help="|C_eff|, configurations the model can generate")
    budget.add_argument("--budget", type=int, help="Evaluation cap")
    knobs(budget)
    common(budget)

    tune = sub.add_parser("tune", help="Tune a target task")
    tune.add_argument("--space", help="Space schema (defaults to the model's or landscape's)")
    tune.add_argument("--data", nargs="+", default=[], help="Source dataset CSV files")
    tune.add_argument("--model", help="Pre-fitted model file")
    tune.add_argument("--target", type=float, required=True, help="Target task value")
    tune.add_argument("--budget", type=_budget_value, help="Evaluations, or 'auto' for the predicted budget")
    tune.add_argument("--quantile", type=float, help="Share of best records kept per task")
    tune.add_argument("--strategy", choices=["gc", "random"], default="gc", help="Tuning strategy")
    tune.add_argument("--evaluator", help="'shell' or 'synthetic:<landscape>'")
    tune.add_argument("--command", help="Shell command template with {name} placeholders")
    tune.add_argument("--build-command", help="Shell template run once per configuration")
    tune.add_argument("--pattern", help="Regular expression capturing the objective")
    tune.add_argument("--repeats", type=int, help="Shell runs per evaluation, the first discarded")
    tune.add_argument("--timeout", type=float, help="Seconds per shell run")
    tune.add_argument("--baseline-objective", type=float, help="Objective the speedup is measured against")
    knobs(tune)
    common(tune)

    an = sub.add_parser("analyze", help="Coverage and KL divergence across quantile levels")
    an.add_argument("--space", required=True, help="Space schema")
    an.add_argument("--data", nargs="+", required=True, help="Dataset CSV files")
    an.add_argument("--reference", required=True, help="Reference dataset CSV (e.g. top 10%%)")
    common(an)

    sim = sub.add_parser("simulate", help="Compare GC tuning with random search on a synthetic landscape")
    sim.add_argument("--landscape", required=True, help="Landscape name")
    sim.add_argument("--seeds", type=int, default=3, help="Number of seeds, starting at --seed")
    sim.add_argument("--budget", type=int, help="Evaluations per target")
    sim.add_argument("--quantile", type=float, help="Share of best records kept per task")
    sim.add_argument("--source-evaluations", type=int, help="Source evaluations per task")
    sim.add_argument("--workers", type=int, help="Seeds run concurrently")
    common(sim)

    return parser


def _first(*values: Any) -> Any:
    return next((v for v in values if v is not None), None)


def _run_config(args: argparse.Namespace, defaults: TuningDefaults, **resolved: Any) -> RunConfig:
    """Echo every resolved knob into a validated RunConfig."""
    fields: Dict[str, Any] = {
        "subcommand": args.subcommand,
        "space": getattr(args, "space", None),
        "datasets": list(getattr(args, "data", None) or []),
        "reference": getattr(args, "reference", None),
        "model": getattr(args, "model", None),
        "quantile": _first(getattr(args, "quantile", None), defaults.quantile),
        "target": getattr(args, "target", None),
        "confidence": _first(getattr(args, "confidence", None), defaults.confidence),
        "ideal_fraction": _first(getattr(args, "ideal_fraction", None), defaults.ideal_fraction),
        "ideal_count": getattr(args, "ideal_count", None),
        "allowance": _first(getattr(args, "allowance", None), defaults.allowance),
        "trials": _first(getattr(args, "trials", None), defaults.support_trials),
        "samples": getattr(args, "samples", None),
        "full_space": getattr(args, "full", None),
        "effective_space": getattr(args, "effective", None),
        "evaluator": getattr(args, "evaluator", None),
        "command": getattr(args, "command", None),
        "build_command": getattr(args, "build_command", None),
        "pattern": getattr(args, "pattern", None),
        "repeats": _first(getattr(args, "repeats", None), defaults.shell_repeats),
        "timeout": _first(getattr(args, "timeout", None), defaults.shell_timeout),
        "baseline_objective": getattr(args, "baseline_objective", None),
        "landscape": getattr(args, "landscape", None),
        "seeds": _first(getattr(args, "seeds", None), 3),
        "source_evaluations": _first(getattr(args, "source_evaluations", None), defaults.source_evaluations),
        "workers": _first(getattr(args, "workers", None), defaults.simulate_workers),
        "strategy": getattr(args, "strategy", "gc"),
        "seed": args.seed,
        "output_dir": _first(args.output_dir, get_settings().output_dir),
    }
    budget = getattr(args, "budget", None)
    fields["budget_auto"] = budget == "auto"
    fields["budget"] = defaults.budget if budget in (None, "auto") else int(budget)
    fields.update(resolved)
    try:
        return RunConfig(**fields)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise UsageError(f"invalid arguments: {problems}") from e


def _defaults_for(run: RunConfig, defaults: TuningDefaults) -> TuningDefaults:
    """Tuning defaults with the run's knobs applied."""
    return defaults.model_copy(update={
        "quantile": run.quantile,
        "budget": run.budget,
        "confidence": run.confidence,
        "ideal_fraction": run.ideal_fraction,
        "allowance": run.allowance,
        "support_trials": run.trials,
        "shell_repeats": run.repeats,
        "shell_timeout": run.timeout,
    })


def _load_sources(run: RunConfig, space: ParameterSpace) -> Dataset:
    if not run.datasets:
        raise UsageError("at least one --data file is required")
    return load_many(run.datasets, space)


def cmd_fit(run: RunConfig, defaults: TuningDefaults, writer: ReportWriter) -> int:
    """Filter the sources, fit, and write the model plus its filter report."""
    space = ParameterSpace.from_yaml(run.space)
    logger.info(f"Space: {space_summary(space)}")
    source = _load_sources(run, space)
    if run.quantile < defaults.quantile_floor:
        logger.warning(f"Quantile {run.quantile} is below {defaults.quantile_floor}; the model may over-specify the space")

    report = filter_report(source, run.quantile, ref=source)
    model = fit_copula(quantile_filter(source, run.quantile), seed=run.seed, quantile=run.quantile)
    path = model.save(writer.output_dir / MODEL_FILE)
    writer.written.append(str(path))
    writer.write_filter_report(report)
    print(f"model: {path} ({model.metadata.row_count} rows, coverage {report.coverage:.4f})")
    return 0


def cmd_sample(run: RunConfig, defaults: TuningDefaults, writer: ReportWriter) -> int:
    """Draw unique conditional samples and write them with their accounting."""
    model = CopulaModel.load(run.model)
    space = model.space
    task_argument(space, run.target)
    cond = ConditionSpec(column=space.task_feature.name, value=run.target)
    batch = GaussianCopula(model, clamp=defaults.latent_clamp).sample(
        cond, run.samples, run.seed, attempt_factor=defaults.attempt_factor
    )
    frame = pd.DataFrame([serialize_configuration(c) for c in batch.configs], columns=list(space.names))
    writer.write_csv("samples.csv", frame)
    writer.write_json("sample_batch.json", {
        "requested": run.samples,
        "unique": len(batch.configs),
        "generated": batch.generated,
        "rejected_repeated": batch.rejected_repeated,
        "saturated": batch.saturated,
    })
    print(frame.to_csv(index=False), end="")
    return 0


def _budget_inputs(run: RunConfig) -> Tuple[BudgetInputs, Optional[float]]:
    if run.model is not None:
        if run.target is None:
            raise UsageError("--model needs --target")
        model = CopulaModel.load(run.model)
        task_argument(model.space, run.target)
        cond = ConditionSpec(column=model.space.task_feature.name, value=run.target)
        estimate, support = estimate_budget(
            model, cond, run.trials, run.seed,
            ideal_fraction=run.ideal_fraction,
            allowance=run.allowance,
            confidence=run.confidence,
            max_budget=run.budget,
            ideal_count=run.ideal_count
        )
        return estimate.inputs, support
    if run.full_space is None or run.effective_space is None:
        raise UsageError("budget needs --model and --target, or --full and --effective")
    try:
        inputs = BudgetInputs(
            full_space=run.full_space,
            effective_space=run.effective_space,
            ideal_fraction=run.ideal_fraction,
            pruned_optimal_allowance=run.allowance,
            confidence=run.confidence,
            max_budget=run.budget,
            ideal_count=run.ideal_count
        )
    except ValidationError as e:
        raise UsageError(f"invalid budget inputs: {e}") from e
    return inputs, None


def cmd_budget(run: RunConfig, defaults: TuningDefaults, writer: ReportWriter) -> int:
    """Estimate k* and write it with the P(k) curve."""
    inputs, support = _budget_inputs(run)
    estimate = min_budget(inputs)
    ideal = effective_ideal_count(inputs)
    horizon = min(inputs.effective_space, max(inputs.max_budget, estimate.k_star or 0))
    report = BudgetReport(
        estimate=estimate,
        curve=probability_curve(inputs.effective_space, ideal, horizon),
        support_estimate=support
    )
    writer.write_budget(report)
    if estimate.defined:
        print(f"Defined: k*={estimate.k_star} (P={estimate.probability_at_k:.4f}, I_eff={estimate.ideal_count})")
    else:
        print(f"Undefined: {estimate.reason}")
    print(f"full_space: {inputs.full_space}")
    print(f"effective_space: {inputs.effective_space}")
    print(f"I_eff: {ideal}")
    print(f"confidence: {inputs.confidence}")
    print(f"allowance: {inputs.pruned_optimal_allowance}")
    print(f"max_budget: {inputs.max_budget}")
    print(f"budget_exceeded: {estimate.budget_exceeded}")
    if support is not None:
        print(f"support_estimate: {support:.1f}")
    print()
    print(curve_frame(report).to_csv(index=False), end="")
    return 0


def build_evaluator(run: RunConfig, space: Optional[ParameterSpace]) -> Tuple[Evaluator, Optional[ParameterSpace]]:
    """
    Evaluator named by the run, and the space it implies.

    Raises:
        UsageError: Missing or malformed evaluator spec
    """
    spec = run.evaluator
    if not spec:
        raise UsageError("tune needs --evaluator ('shell' or 'synthetic:<landscape>')")
    if spec.startswith("synthetic:"):
        landscape = get_landscape(spec.split(":", 1)[1])
        if space is not None and space.fingerprint() != landscape.space.fingerprint():
            raise UsageError(f"space does not match landscape '{landscape.name}'")
        return SyntheticEvaluator(landscape), landscape.space
    if spec == "shell":
        if space is None:
            raise UsageError("the shell evaluator needs --space, --model or --data with --space")
        if not run.command or not run.pattern:
            raise UsageError("the shell evaluator needs --command and --pattern")
        evaluator = ShellEvaluator(
            run.command, run.pattern, space,
            timeout=run.timeout,
            repeats=run.repeats,
            build_command=run.build_command
        )
        return evaluator, space
    raise UsageError(f"unknown evaluator '{spec}', expected 'shell' or 'synthetic:<landscape>'")


def _resolve_auto_budget(model: CopulaModel, run: RunConfig, defaults: TuningDefaults) -> int:
    """Predicted k* when defined and within the cap, else the cap."""
    cond = ConditionSpec(column=model.space.task_feature.name, value=run.target)
    estimate, _ = estimate_budget(
        model, cond, run.trials, run.seed,
        ideal_fraction=run.ideal_fraction,
        allowance=run.allowance,
        confidence=run.confidence,
        max_budget=run.budget,
        ideal_count=run.ideal_count
    )
    budget = estimate.usable_budget()
    if budget is None:
        why = estimate.reason if not estimate.defined else f"k*={estimate.k_star} exceeds the cap"
        logger.warning(f"Budget auto: {why}; using {run.budget} evaluations")
        return run.budget
    logger.info(f"Budget auto: using predicted k*={budget}")
    return budget


def cmd_tune(run: RunConfig, defaults: TuningDefaults, writer: ReportWriter) -> int:
    """Tune the target with GC (or the random baseline) and write the report."""
    model = CopulaModel.load(run.model) if run.model else None
    space = ParameterSpace.from_yaml(run.space) if run.space else None
    if model is not None:
        if space is not None and space.fingerprint() != model.fingerprint:
            raise UsageError("--space does not match the model's space")
        space = model.space

    evaluator, space = build_evaluator(run, space)
    tuner = Tuner(evaluator, defaults)
    task_argument(space, run.target)

    baseline = run.baseline_objective
    if baseline is None:
        baseline = tuner.baseline(space, run.target)

    if run.strategy == "random":
        report = tuner.tune_random(space, run.target, run.budget, seed=run.seed, baseline_objective=baseline)
    else:
        if model is None:
            source = _load_sources(run, space)
            if len(source.task_values()) < 2:
                raise UsageError("transfer tuning needs source data from at least 2 tasks")
            if run.quantile < defaults.quantile_floor:
                logger.warning(
                    f"Quantile {run.quantile} is below {defaults.quantile_floor}; "
                    "the model may over-specify the space"
                )
            model = fit_copula(quantile_filter(source, run.quantile), seed=run.seed, quantile=run.quantile)
        budget = _resolve_auto_budget(model, run, defaults) if run.budget_auto else run.budget
        report = tuner.tune(
            None, run.target, budget,
            seed=run.seed,
            model=model,
            baseline_objective=baseline,
            predict_budget=True
        )

    writer.write_tune(report)
    print(f"best objective {report.best_objective} after {len(report.rows)} evaluations")
    return 0


def cmd_analyze(run: RunConfig, defaults: TuningDefaults, writer: ReportWriter) -> int:
    """Coverage and KL of the filtered data at the ten quantile levels."""
    space = ParameterSpace.from_yaml(run.space)
    ds = _load_sources(run, space)
    ref = load_csv(run.reference, space)
    reports = analyze(ds, ref)
    writer.write_analysis(reports)
    print(pd.DataFrame([r.model_dump() for r in reports]).to_csv(index=False), end="")
    return 0


def cmd_simulate(run: RunConfig, defaults: TuningDefaults, writer: ReportWriter) -> int:
    """Paired GC and random runs over several seeds on a synthetic landscape."""
    landscape = get_landscape(run.landscape)
    seeds = list(range(run.seed, run.seed + run.seeds))
    simulator = Simulator(landscape, defaults)
    runs = simulator.run(
        seeds,
        budget=run.budget,
        quantile=run.quantile,
        source_evaluations=run.source_evaluations,
        workers=run.workers
    )
    for strategy in ("gc", "random"):
        for seed in seeds:
            writer.write_csv(f"trajectories/{strategy}_seed{seed}.csv", trajectories(runs, strategy, seed))
    aggregate = simulator.aggregate(runs)
    writer.write_simulation(landscape.name, aggregate, seeds, run.budget, run.quantile)
    print(aggregate.to_csv(index=False), end="")
    return 0


COMMANDS = {
    "fit": cmd_fit,
    "sample": cmd_sample,
    "budget": cmd_budget,
    "tune": cmd_tune,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the CLI.

    Returns:
        Process exit code
    """
    try:
        args = build_parser().parse_args(argv)
        config: AppConfig = load_app_config(args.config)
        setup_logging(config.logging, args.log_file, args.log_level)
        run = _run_config(args, config.tuning)
        defaults = _defaults_for(run, config.tuning)
        writer = ReportWriter(run.output_dir)
        code = COMMANDS[run.subcommand](run, defaults, writer)
        writer.write_metadata(run)
        return code
    except CopulaTuneError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
