from importlib.resources import files
from pathlib import Path

from starlette.config import Config

env_file = Path(".env")
config = Config(
    env_file=env_file if env_file.exists() else None,  # avoid warning
    env_prefix="QLG_",
)

STRUCTURAL_TOL = config("STRUCTURAL_TOL", cast=float, default=1e-10)
ALGEBRAIC_TOL = config("ALGEBRAIC_TOL", cast=float, default=1e-12)
POSITIVITY_TOL = config("POSITIVITY_TOL", cast=float, default=1e-9)

MAX_DIMENSION = config("MAX_DIMENSION", cast=int, default=32)
SCAN_WORKERS = config("SCAN_WORKERS", cast=int, default=4)

NOISE_PROFILE = config(
    "NOISE_PROFILE",
    cast=Path,
    default=Path(str(files(__package__).joinpath("profiles", "crotonic_fit.json"))),
)
