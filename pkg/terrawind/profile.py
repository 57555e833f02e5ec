from dataclasses import dataclass, replace
from typing import List

from .exceptions import InvalidHeight
from .synthetic import StationObs


@dataclass(frozen=True)
class PowerLawParams:
    # neutral-stability shear exponent
    alpha: float = 1.0 / 7.0


def power_law(u_ref: float, z_ref: float, z_target: float, params: PowerLawParams = PowerLawParams()) -> float:
    """Extrapolates a wind speed from height z_ref to z_target: u_ref * (z_target / z_ref) ** alpha."""
    for z in (z_ref, z_target):
        if not z > 0:
            raise InvalidHeight(z)
    if u_ref < 0:
        raise ValueError(f"Wind speed must be nonnegative, got {u_ref}")
    if z_target == z_ref:
        return float(u_ref)
    return float(u_ref * (z_target / z_ref) ** params.alpha)


def lift_stations(
    stations: List[StationObs], z_target: float, params: PowerLawParams = PowerLawParams()
) -> List[StationObs]:
    lifted = []
    for station in stations:
        if station.height_m == z_target:
            lifted.append(station)
            continue
        speed = power_law(station.speed_mps, station.height_m, z_target, params)
        lifted.append(replace(station, height_m=float(z_target), speed_mps=speed))
    return lifted
