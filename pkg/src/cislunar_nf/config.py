"""Physical constants and unit conversions, loaded from JSON config."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from importlib import resources

SECONDS_PER_DAY = 86400.0


def _default_constants() -> dict:
    text = resources.files("cislunar_nf").joinpath("configs/earth_moon.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class Units:
    """Earth-Moon nondimensionalization.

    Attributes
    ----------
    length_unit_km : float
        1 LU, the primaries' separation.
    time_unit_s : float
        1 TU, the inverse mean motion.
    year_days : float
        Length of the year used to annualize costs.
    """

    length_unit_km: float
    time_unit_s: float
    year_days: float

    @classmethod
    def default(cls) -> "Units":
        c = _default_constants()
        return cls(c["length_unit_km"], c["time_unit_s"], c["year_days"])

    @property
    def velocity_unit_mps(self) -> float:
        return 1000.0 * self.length_unit_km / self.time_unit_s

    @property
    def year_tu(self) -> float:
        return self.year_days * SECONDS_PER_DAY / self.time_unit_s

    def to_dict(self) -> dict:
        return asdict(self)


def default_mu() -> float:
    return float(_default_constants()["mu"])
