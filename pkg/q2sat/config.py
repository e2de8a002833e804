import os
from typing import Optional

from pydantic import BaseModel, ConfigDict


class Settings(BaseModel):
    model_config = ConfigDict(frozen=True)

    output_dir: str = "runs"
    db_url: Optional[str] = None
    dense_limit_qubits: int = 12
    dynamics_max_qubits: int = 14
    workers: int = 1
    log_level: str = "INFO"


def parse_int(env_value: Optional[str], default: int) -> int:
    if env_value is None or not env_value.strip():
        return default
    return int(env_value.strip())


def load_settings() -> Settings:
    """
    Read settings from the environment.
    Empty Q2SAT_DB_URL disables the run ledger.
    """
    db_url = os.getenv("Q2SAT_DB_URL", "").strip()
    return Settings(
        output_dir=os.getenv("Q2SAT_OUTPUT_DIR", "runs"),
        db_url=db_url or None,
        dense_limit_qubits=parse_int(os.getenv("Q2SAT_DENSE_LIMIT_QUBITS"), 12),
        dynamics_max_qubits=parse_int(os.getenv("Q2SAT_DYNAMICS_MAX_QUBITS"), 14),
        workers=parse_int(os.getenv("Q2SAT_WORKERS"), 1),
        log_level=os.getenv("Q2SAT_LOG_LEVEL", "INFO").upper(),
    )


SETTINGS: Settings = load_settings()

# -------------------------------------------------------------------
# Model defaults (units of Delta, hbar = 1)
# -------------------------------------------------------------------

DEFAULT_DELTA = 1.0
DEFAULT_BETA = complex(2 ** -0.5, 0.0)
DEFAULT_DENSITY = 0.1
DEFAULT_BIN_WIDTH = 0.1
# T = multiplier pi / (50 delta^2). Multiplier 1 turns at 2 pi / T = 100 delta^2, faster
# than the gap; 2500 gives T = 50 pi / delta^2 and 2 pi / T = delta^2 / 25.
DEFAULT_MULTIPLIER = 2500.0

# Desk-scale sample counts per n; the full protocol sits behind --full
DESK_SAMPLES = {**{n: 500 for n in range(5, 12)}, 12: 100, 13: 100, 14: 30}
FULL_SAMPLES = {**{n: 10000 for n in range(5, 12)}, 12: 1000, 13: 1000, 14: 1000, 15: 100}


def samples_for(n: int, full: bool = False) -> int:
    table = FULL_SAMPLES if full else DESK_SAMPLES
    if n in table:
        return table[n]
    # Outside the tabulated range fall back to the smallest listed count
    return min(table.values())
