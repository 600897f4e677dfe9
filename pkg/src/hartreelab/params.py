"""Parameter record shared by the windows, norms and bound checks."""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace


class ParameterError(ValueError):
    """A parameter record violates the required orderings."""


@dataclass(frozen=True)
class ParamSet:
    beta: float = 0.99
    delta: float = 0.002
    epsilon: float = 0.1
    epsilon1: float = 0.01
    epsilon2: float = 0.001
    kappa: float = 1000.0
    b: float | None = None
    tau: float = 0.1
    theta: float = 0.1

    def __post_init__(self):
        if self.b is None:
            object.__setattr__(self, "b", 0.5 + 1.0 / self.kappa)
        self.validate()

    def validate(self) -> None:
        problems = []
        if not 0 < self.beta <= 1:
            problems.append("need 0 < beta <= 1")
        if not 0 < self.epsilon2 < self.epsilon1 < self.epsilon:
            problems.append("need 0 < epsilon2 < epsilon1 < epsilon")
        if not 0 < self.delta < 1 - self.beta:
            problems.append("need 0 < delta < 1 - beta")
        if not self.kappa > 1.0 / self.delta:
            problems.append("need kappa > 1/delta")
        if abs(self.b - (0.5 + 1.0 / self.kappa)) > 1e-15:
            problems.append("need b = 1/2 + 1/kappa")
        if not self.tau > 0:
            problems.append("need tau > 0")
        if not self.theta > 0:
            problems.append("need theta > 0")
        if problems:
            raise ParameterError("; ".join(problems))

    def with_(self, **changes) -> "ParamSet":
        if "kappa" in changes and "b" not in changes:
            changes["b"] = None
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_PARAMS = ParamSet()
