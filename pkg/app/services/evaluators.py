"""Objective evaluators: shell commands and synthetic landscapes."""

import logging
import math
import re
import shlex
import string
import subprocess
from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from tenacity import (
    before_sleep_log,
    retry,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from app.core.errors import EvaluatorError, UsageError
from app.models.space import Configuration, ParameterSpace

logger = logging.getLogger(__name__)


class Evaluator(ABC):
    """Measures f(c; t), lower is better."""

    name: str = "evaluator"

    @abstractmethod
    def evaluate(self, config: Configuration, task_value: Union[int, float]) -> float:
        """
        Evaluate a configuration on a task.

        Args:
            config: Configuration to measure
            task_value: Task feature value

        Returns:
            Finite objective

        Raises:
            EvaluatorError: If no objective could be produced
        """
        pass


def template_fields(template: str) -> List[str]:
    """Placeholder names of a `{name}` command template."""
    try:
        return [field for _, field, _, _ in string.Formatter().parse(template) if field is not None]
    except ValueError as e:
        raise UsageError(f"malformed command template: {e}") from e


class ShellEvaluator(Evaluator):
    """
    Runs a command and parses the objective from its output.

    The command runs `repeats` times; the first run warms caches and is
    discarded, the objective is the mean of the remaining runs. An optional
    build command runs once per configuration before the timed runs.
    """

    name = "shell"

    def __init__(
        self,
        command: str,
        pattern: str,
        space: ParameterSpace,
        timeout: float = 600.0,
        repeats: int = 3,
        build_command: Optional[str] = None,
        cwd: Optional[str] = None
    ):
        """
        Initialize shell evaluator.

        Args:
            command: Template with one `{name}` placeholder per tunable and
                the task feature
            pattern: Regular expression with one capture group around the
                objective value
            space: Tuning space
            timeout: Seconds per command run
            repeats: Runs per evaluation
            build_command: Optional template run once before the timed runs
            cwd: Working directory for the commands

        Raises:
            UsageError: Placeholders do not match the space, bad pattern
        """
        fields = template_fields(command)
        expected = set(space.columns)
        if set(fields) != expected:
            missing = sorted(expected - set(fields))
            unknown = sorted(set(fields) - expected)
            raise UsageError(
                f"command placeholders must match the space: missing {missing}, unknown {unknown}"
            )
        if build_command is not None:
            unknown = sorted(set(template_fields(build_command)) - expected)
            if unknown:
                raise UsageError(f"build command has unknown placeholders {unknown}")

        try:
            self.pattern = re.compile(pattern)
        except re.error as e:
            raise UsageError(f"invalid objective pattern: {e}") from e
        if self.pattern.groups != 1:
            raise UsageError("objective pattern needs exactly one capture group")
        if repeats < 1:
            raise UsageError("repeats must be at least 1")

        self.command = command
        self.build_command = build_command
        self.space = space
        self.timeout = timeout
        self.repeats = repeats
        self.cwd = cwd
        logger.info(f"ShellEvaluator initialized (repeats={repeats}, timeout={timeout}s)")

    def render(self, template: str, config: Configuration, task_value: Union[int, float]) -> str:
        """Substitute shell-quoted values into a template."""
        values: Dict[str, str] = {
            name: shlex.quote(str(value)) for name, value in config.values
        }
        values[self.space.task_feature.name] = shlex.quote(str(task_value))
        return template.format(**values)

    @retry(
        stop=stop_after_attempt(3),
        wait=wait_exponential(multiplier=0.5, min=0.5, max=4),
        retry=retry_if_exception_type((BlockingIOError, InterruptedError)),
        before_sleep=before_sleep_log(logger, logging.WARNING),
        reraise=True
    )
    def _spawn(self, command: str) -> subprocess.CompletedProcess:
        return subprocess.run(
            command,
            shell=True,
            capture_output=True,
            text=True,
            timeout=self.timeout,
            cwd=self.cwd
        )

    def _run(self, command: str) -> subprocess.CompletedProcess:
        try:
            result = self._spawn(command)
        except subprocess.TimeoutExpired:
            raise EvaluatorError(f"command timed out after {self.timeout}s: {command}")
        except OSError as e:
            raise EvaluatorError(f"cannot run command: {e}") from e
        if result.returncode != 0:
            detail = (result.stderr or "").strip().splitlines()[-1:] or [""]
            raise EvaluatorError(
                f"command exited with status {result.returncode}: {command} {detail[0]}".rstrip()
            )
        return result

    def parse(self, output: str) -> float:
        """Extract the objective from command output."""
        match = self.pattern.search(output)
        if match is None:
            raise EvaluatorError("objective pattern did not match the command output")
        try:
            value = float(match.group(1))
        except ValueError:
            raise EvaluatorError(f"cannot parse objective {match.group(1)!r}")
        if not math.isfinite(value):
            raise EvaluatorError(f"non-finite objective {match.group(1)!r}")
        return value

    @staticmethod
    def aggregate(measurements: Sequence[float]) -> float:
        """Mean of all runs but the first (the only run when there is one)."""
        if len(measurements) == 1:
            return float(measurements[0])
        return float(np.mean(measurements[1:]))

    def evaluate(self, config: Configuration, task_value: Union[int, float]) -> float:
        if self.build_command is not None:
            self._run(self.render(self.build_command, config, task_value))

        command = self.render(self.command, config, task_value)
        measurements = [self.parse(self._run(command).stdout) for _ in range(self.repeats)]
        objective = self.aggregate(measurements)
        logger.debug(f"Shell objective {objective:.6g} from {measurements}")
        return objective


class SyntheticEvaluator(Evaluator):
    """Evaluates a named analytic landscape."""

    name = "synthetic"

    def __init__(self, landscape):
        """
        Initialize synthetic evaluator.

        Args:
            landscape: Landscape from app.services.landscapes
        """
        self.landscape = landscape
        self.calls = 0

    def evaluate(self, config: Configuration, task_value: Union[int, float]) -> float:
        self.calls += 1
        return self.landscape.objective(config, task_value)
