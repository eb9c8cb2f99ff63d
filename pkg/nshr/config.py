import os
from functools import lru_cache
from typing import NamedTuple

from dotenv import dotenv_values

from .errors import ConfigError

DEFAULT_CONSTANTS_PATH = os.path.join(os.path.dirname(__file__), "../config/experiments.env")


class Settings(NamedTuple):

    Q1: float
    Q2: float
    L1_WEIGHT: float

    T0: float
    T_END: float
    X0: tuple[float, ...]
    V0: tuple[float, ...]

    ABS_TOL: float
    REL_TOL: float
    INITIAL_STEP: float
    MAX_STEPS: int
    PI_SAFETY: float
    FACTOR_MIN: float
    FACTOR_MAX: float

    SAMPLES: int
    RATE_WINDOW: tuple[float, float]
    OSCILLATION_WINDOW: tuple[float, float]
    NUMERICAL_FLOOR: float
    LYAPUNOV_SLACK: float

    ALPHA: float
    BETA: float
    P: float
    C: float
    VARY_BETA_VALUES: tuple[float, ...]

    VARY_ALPHA_VALUES: tuple[float, ...]
    VARY_ALPHA_P_OFFSET: float
    VARY_ALPHA_C: float

    COMPARE_C: float
    AL_BETA: float
    AL_LAMBDA: float
    BK_BETA: float
    BK_B_SCALE: float
    BK_B_POWER: float
    BK_LAMBDA_SCALE: float
    BK_LAMBDA_POWER: float

    MONOTONE_ALPHA: float
    MONOTONE_BETA: float
    MONOTONE_SIGMA: float
    MONOTONE_P: float
    MONOTONE_C_FACTOR: float

    DNSHR_H: float
    DNSHR_N: int
    DNSHR_STOP: float
    DNSHR_DIVERGENCE_FACTOR: float

    GOLDEN_TOL: float
    EPSILON_FRACTION: float
    GRID_DOUBLINGS: int
    TREND_TOL: float

    @property
    def monotone_c(self) -> float:
        """
        Smoothing scale of the monotone demonstration: MONOTONE_C_FACTOR times the
        threshold 1/(4(alpha - sigma - 1) sigma) of the monotone assumptions.
        """
        a, s = self.MONOTONE_ALPHA, self.MONOTONE_SIGMA
        return self.MONOTONE_C_FACTOR / (4.0 * (a - s - 1.0) * s)

    def vary_alpha_p(self, alpha: float) -> float:
        return alpha - self.VARY_ALPHA_P_OFFSET

    def as_lines(self) -> list[str]:
        lines = []
        for key, value in self._asdict().items():
            if isinstance(value, tuple):
                value = ",".join(repr(v) for v in value)
            lines.append(f"{key}={value}")
        return lines


def parse_number(raw: str) -> float:
    """Parses a float, also accepting a single fraction such as ``1.1/9``."""
    text = raw.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def parse_vector(raw: str) -> tuple[float, ...]:
    return tuple(parse_number(part) for part in raw.split(",") if part.strip())


@lru_cache()
def get_settings(path: str = DEFAULT_CONSTANTS_PATH) -> Settings:
    values = dotenv_values(path)
    if not values:
        raise ConfigError(f"constants table {path} is missing or empty")

    def number(key: str) -> float:
        raw = values.get(key)
        if raw is None:
            raise ConfigError(f"missing key {key} in {path}")
        try:
            return parse_number(raw)
        except ValueError as e:
            raise ConfigError(f"bad value for {key} in {path}: {raw!r}") from e

    def integer(key: str) -> int:
        return int(number(key))

    def vector(key: str, size: int | None = None) -> tuple[float, ...]:
        raw = values.get(key)
        if raw is None:
            raise ConfigError(f"missing key {key} in {path}")
        try:
            vec = parse_vector(raw)
        except ValueError as e:
            raise ConfigError(f"bad value for {key} in {path}: {raw!r}") from e
        if size is not None and len(vec) != size:
            raise ConfigError(f"{key} in {path} needs {size} entries, got {len(vec)}")
        return vec

    return Settings(
        Q1                  = number("Q1"),
        Q2                  = number("Q2"),
        L1_WEIGHT           = number("L1_WEIGHT"),

        T0                  = number("T0"),
        T_END               = number("T_END"),
        X0                  = vector("X0"),
        V0                  = vector("V0"),

        ABS_TOL             = number("ABS_TOL"),
        REL_TOL             = number("REL_TOL"),
        INITIAL_STEP        = number("INITIAL_STEP"),
        MAX_STEPS           = integer("MAX_STEPS"),
        PI_SAFETY           = number("PI_SAFETY"),
        FACTOR_MIN          = number("FACTOR_MIN"),
        FACTOR_MAX          = number("FACTOR_MAX"),

        SAMPLES             = integer("SAMPLES"),
        RATE_WINDOW         = vector("RATE_WINDOW", 2),
        OSCILLATION_WINDOW  = vector("OSCILLATION_WINDOW", 2),
        NUMERICAL_FLOOR     = number("NUMERICAL_FLOOR"),
        LYAPUNOV_SLACK      = number("LYAPUNOV_SLACK"),

        ALPHA               = number("ALPHA"),
        BETA                = number("BETA"),
        P                   = number("P"),
        C                   = number("C"),
        VARY_BETA_VALUES    = vector("VARY_BETA_VALUES"),

        VARY_ALPHA_VALUES   = vector("VARY_ALPHA_VALUES"),
        VARY_ALPHA_P_OFFSET = number("VARY_ALPHA_P_OFFSET"),
        VARY_ALPHA_C        = number("VARY_ALPHA_C"),

        COMPARE_C           = number("COMPARE_C"),
        AL_BETA             = number("AL_BETA"),
        AL_LAMBDA           = number("AL_LAMBDA"),
        BK_BETA             = number("BK_BETA"),
        BK_B_SCALE          = number("BK_B_SCALE"),
        BK_B_POWER          = number("BK_B_POWER"),
        BK_LAMBDA_SCALE     = number("BK_LAMBDA_SCALE"),
        BK_LAMBDA_POWER     = number("BK_LAMBDA_POWER"),

        MONOTONE_ALPHA      = number("MONOTONE_ALPHA"),
        MONOTONE_BETA       = number("MONOTONE_BETA"),
        MONOTONE_SIGMA      = number("MONOTONE_SIGMA"),
        MONOTONE_P          = number("MONOTONE_P"),
        MONOTONE_C_FACTOR   = number("MONOTONE_C_FACTOR"),

        DNSHR_H             = number("DNSHR_H"),
        DNSHR_N             = integer("DNSHR_N"),
        DNSHR_STOP          = number("DNSHR_STOP"),
        DNSHR_DIVERGENCE_FACTOR = number("DNSHR_DIVERGENCE_FACTOR"),

        GOLDEN_TOL          = number("GOLDEN_TOL"),
        EPSILON_FRACTION    = number("EPSILON_FRACTION"),
        GRID_DOUBLINGS      = integer("GRID_DOUBLINGS"),
        TREND_TOL           = number("TREND_TOL"),
    )
