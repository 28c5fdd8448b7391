"""Model parameters for the mass-structured chemostat."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class ChemostatParams:
    """Physical and model constants shared by the IBM, IDE and ODE models.

    ``D`` and ``V`` are experiment-specific and have no default; every other
    field defaults to the reference parameter set used throughout the
    simulations (substrate in mg/l, masses in mg, rates in 1/h).
    """

    D: float                        # dilution rate, 1/h
    V: float                        # vessel volume, l
    s_in: float = 10.0              # substrate input concentration, mg/l
    k: float = 1.0                  # stoichiometric coefficient, -
    m_max: float = 0.001            # maximum individual mass, mg
    m_div: float = 0.0004           # minimum division mass, mg
    lambda_bar: float = 1.0         # maximum division rate, 1/h
    p_lambda: float = 1000.0        # division-rate shape parameter, -
    p_beta: float = 7.0             # division-kernel beta exponent, >= 1
    r_max: float = 1.0              # maximum Gompertz rate, 1/h
    k_r: float = 10.0               # Monod half-saturation for growth, mg/l
    s0: float = 5.0                 # initial substrate concentration, mg/l

    def __post_init__(self) -> None:
        problems = self.validate()
        if problems:
            raise ValueError("invalid parameters: " + "; ".join(problems))

    def validate(self) -> list[str]:
        """Return a list of constraint violations (empty when valid)."""
        problems = []
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                problems.append(f"{f.name} must be a finite number, got {v!r}")
        if problems:
            return problems
        for name in ("D", "V", "s_in", "k", "m_max", "m_div", "lambda_bar",
                     "p_lambda", "p_beta", "r_max", "k_r"):
            if getattr(self, name) <= 0.0:
                problems.append(f"{name} must be strictly positive, got {getattr(self, name)}")
        if self.s0 < 0.0:
            problems.append(f"s0 must be >= 0, got {self.s0}")
        if self.m_div >= self.m_max:
            problems.append(f"m_div must be < m_max, got m_div={self.m_div}, m_max={self.m_max}")
        if self.p_beta < 1.0:
            problems.append(f"p_beta must be >= 1, got {self.p_beta}")
        return problems

    def with_updates(self, **kwargs) -> "ChemostatParams":
        return replace(self, **kwargs)

    @property
    def s_bound(self) -> float:
        """A priori upper bound on the substrate concentration."""
        return max(self.s0, self.s_in)
