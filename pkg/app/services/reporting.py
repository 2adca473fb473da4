"""Writes run outputs: JSON documents, CSV tables and Markdown summaries."""

import json
import logging
from pathlib import Path
from typing import Any, List, Optional, Sequence, Union

import pandas as pd
from jinja2 import Template
from pydantic import BaseModel

from app.models.budget import BudgetReport
from app.models.dataset import FilterReport
from app.models.results import TuneReport
from app.models.run import RunConfig, RunMetadata
from app.services.dataset import reports_to_frame

logger = logging.getLogger(__name__)

TUNE_TEMPLATE = """# Tuning run: {{ strategy }} on task {{ target }}

- **Seed:** {{ seed }}
- **Budget:** {{ budget }} ({{ evaluations }} evaluated, {{ failed }} failed)
{% if quantile is not none -%}
- **Quantile:** {{ quantile }}
{% endif -%}
- **Sampling:** {{ generated }} draws, {{ rejected_repeated }} repeats rejected{% if saturated %}, saturated{% endif %}

## Outcome

- **Best objective:** {{ fmt(best_objective) }} (evaluation {{ best_index }})
- **First objective:** {{ fmt(first_objective) }}
{% if baseline_objective is not none -%}
- **Baseline objective:** {{ fmt(baseline_objective) }}
- **Speedup:** {{ fmt(speedup) }}x
{% endif -%}
{% if predicted_budget is not none -%}
- **Predicted budget:** {{ predicted_budget }} (best within it: {{ fmt(best_at_predicted) }})
{% elif budget_estimate -%}
- **Predicted budget:** undefined
{% endif %}
{% if best_config %}
## Best configuration

| Parameter | Value |
|-----------|-------|
{% for name, value in best_config.items() -%}
| {{ name }} | {{ value }} |
{% endfor %}
{% endif %}"""

SIMULATION_TEMPLATE = """# Simulation on '{{ landscape }}'

- **Seeds:** {{ seeds | join(', ') }}
- **Budget:** {{ budget }}
- **Quantile:** {{ quantile }}

| Target | Strategy | 1st | 1st in top 10% | Best at k* | Budget | Best index | Speedup |
|--------|----------|-----|----------------|------------|--------|------------|---------|
{% for row in rows -%}
| {{ row.target }} ({{ row.size | int }}) | {{ row.strategy }} | {{ fmt(row.first_mean) }} | {{ "%.0f%%" | format(100 * row.first_top10) }} | {{ fmt(row.best_at_predicted) }} | {{ fmt(row.best_at_budget) }} | {{ "%.1f" | format(row.best_index) }} | {{ fmt(row.speedup) }} |
{% endfor %}"""


def _fmt(value: Any) -> str:
    if value is None:
        return "n/a"
    try:
        number = float(value)
    except (TypeError, ValueError):
        return str(value)
    if number != number:
        return "n/a"
    return f"{number:.4g}"


def curve_frame(report: BudgetReport) -> pd.DataFrame:
    """P(k) curve as a k, probability table."""
    return pd.DataFrame([p.model_dump() for p in report.curve], columns=["k", "probability"])


class ReportWriter:
    """Writes every file a CLI run produces under one output directory."""

    def __init__(self, output_dir: Union[str, Path]):
        """
        Initialize report writer.

        Args:
            output_dir: Directory receiving all outputs (created if missing)
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.written: List[str] = []
        logger.info(f"ReportWriter initialized at {self.output_dir}")

    def _path(self, name: str) -> Path:
        path = self.output_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        self.written.append(str(path))
        return path

    def write_json(self, name: str, document: Union[BaseModel, dict]) -> Path:
        """Write a pydantic model or a plain dict as indented JSON."""
        path = self._path(name)
        if isinstance(document, BaseModel):
            path.write_text(document.model_dump_json(indent=2), encoding="utf-8")
        else:
            path.write_text(json.dumps(document, indent=2, default=str), encoding="utf-8")
        logger.debug(f"JSON saved to {path}")
        return path

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        """Write a table without the pandas index."""
        path = self._path(name)
        frame.to_csv(path, index=False)
        logger.debug(f"CSV saved to {path}")
        return path

    def write_markdown(self, name: str, template: str, **context: Any) -> Path:
        """Render an inline jinja2 template to a Markdown file."""
        path = self._path(name)
        path.write_text(Template(template).render(fmt=_fmt, **context), encoding="utf-8")
        logger.debug(f"Markdown saved to {path}")
        return path

    def write_tune(self, report: TuneReport, prefix: str = "") -> List[Path]:
        """
        Write a tuning run.

        evaluations.csv holds only seed-determined values; wall-clock times go
        to timings.csv.
        """
        summary = report.summary()
        paths = [
            self.write_csv(f"{prefix}evaluations.csv", report.evaluations_frame()),
            self.write_csv(f"{prefix}timings.csv", report.timings_frame()),
            self.write_json(f"{prefix}summary.json", summary),
            self.write_markdown(f"{prefix}summary.md", TUNE_TEMPLATE, **summary),
        ]
        logger.info(f"Tune report saved to {self.output_dir}")
        return paths

    def write_filter_report(self, report: FilterReport, name: str = "filter_report.json") -> Path:
        """Write the fit-time filtering summary."""
        return self.write_json(name, report)

    def write_analysis(self, reports: Sequence[FilterReport], name: str = "analysis.csv") -> Path:
        """Write one coverage/KL row per quantile level."""
        path = self.write_csv(name, reports_to_frame(reports))
        logger.info(f"Analysis saved to {path}")
        return path

    def write_budget(self, report: BudgetReport) -> List[Path]:
        """Write the budget estimate and its P(k) curve."""
        curve = curve_frame(report)
        return [
            self.write_json("budget.json", report),
            self.write_csv("budget_curve.csv", curve),
        ]

    def write_simulation(
        self,
        landscape: str,
        aggregate: pd.DataFrame,
        seeds: Sequence[int],
        budget: int,
        quantile: float
    ) -> List[Path]:
        """Write the aggregate comparison table and its Markdown rendering."""
        rows = aggregate.to_dict(orient="records")
        paths = [
            self.write_csv("aggregate.csv", aggregate),
            self.write_markdown(
                "summary.md",
                SIMULATION_TEMPLATE,
                landscape=landscape,
                seeds=list(seeds),
                budget=budget,
                quantile=quantile,
                rows=rows
            ),
        ]
        logger.info(f"Simulation summary saved to {self.output_dir}")
        return paths

    def write_metadata(self, run: RunConfig, extra: Optional[List[str]] = None) -> Path:
        """
        Write run_metadata.json listing the run's knobs, versions and outputs.

        Written last so the output list is complete.
        """
        path = self.output_dir / "run_metadata.json"
        outputs = list(self.written) + list(extra or [])
        metadata = RunMetadata(run=run, outputs=outputs)
        path.write_text(metadata.model_dump_json(indent=2), encoding="utf-8")
        self.written.append(str(path))
        logger.info(f"Run metadata saved to {path}")
        return path
