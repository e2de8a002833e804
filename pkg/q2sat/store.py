import logging
from typing import Optional

from sqlalchemy import Column, Float, Index, Integer, String, create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

logger = logging.getLogger(__name__)

Base = declarative_base()

# -------------------------------------------------------------------
# Models
# -------------------------------------------------------------------


class SpectrumRow(Base):
    __tablename__ = "spectra"
    id = Column(Integer, primary_key=True, index=True)
    n = Column(Integer, nullable=False)
    # Seeds are unsigned 64-bit; stored as text so every backend keeps them exact
    seed = Column(String(20), nullable=False)
    density = Column(Float, nullable=False)
    beta_re = Column(Float, nullable=False)
    beta_im = Column(Float, nullable=False)
    delta = Column(Float, nullable=False)
    m = Column(Integer, nullable=False)
    degeneracy = Column(Integer)
    gap_delta = Column(Float)
    inv_sq_gap = Column(Float)
    method = Column(String(16))
    excluded_reason = Column(String(255))
    wall_time_ms = Column(Float)

    __table_args__ = (
        Index("idx_spectrum_key", "n", "seed", "density", "beta_re", "beta_im", "delta"),
    )


class EvolutionRow(Base):
    __tablename__ = "evolutions"
    id = Column(Integer, primary_key=True, index=True)
    n = Column(Integer, nullable=False)
    seed = Column(String(20), nullable=False)
    density = Column(Float, nullable=False)
    beta_re = Column(Float, nullable=False)
    beta_im = Column(Float, nullable=False)
    delta = Column(Float, nullable=False)
    multiplier = Column(Float, nullable=False)
    frame = Column(String(16), nullable=False, default="lab")
    # 0 means the default step rule
    requested_steps = Column(Integer, nullable=False, default=0)
    total_time = Column(Float)
    steps = Column(Integer)
    ground_fidelity = Column(Float)
    trivial_probability = Column(Float)
    norm_drift = Column(Float)
    predicted_trivial_probability = Column(Float)
    excluded_reason = Column(String(255))
    wall_time_ms = Column(Float)

    __table_args__ = (
        Index("idx_evolution_key", "n", "seed", "density", "beta_re", "beta_im", "delta", "multiplier", "frame",
              "requested_steps"),
    )


# -------------------------------------------------------------------
# Ledger
# -------------------------------------------------------------------


def _key_filter(n: int, seed: int, density: float, beta: complex, delta: float) -> dict:
    return dict(n=n, seed=str(seed), density=density, beta_re=beta.real, beta_im=beta.imag, delta=delta)


class RunLedger:
    """
    Per-instance results of ensemble runs, so interrupted sweeps resume.
    Rows are keyed by (n, seed, density, beta, delta), evolutions also by
    multiplier, frame and requested step count, and written once.
    """

    def __init__(self, db_url: str):
        self.engine = create_engine(db_url)
        self.SessionLocal = sessionmaker(bind=self.engine, expire_on_commit=False)
        Base.metadata.create_all(bind=self.engine)
        logger.info(f"Run ledger ready at {db_url}")

    def get_spectrum(self, n: int, seed: int, density: float, beta: complex, delta: float) -> Optional[SpectrumRow]:
        db = self.SessionLocal()
        try:
            return db.query(SpectrumRow).filter_by(**_key_filter(n, seed, density, beta, delta)).first()
        finally:
            db.close()

    def put_spectrum(self, row: SpectrumRow) -> SpectrumRow:
        db = self.SessionLocal()
        try:
            db.add(row)
            db.commit()
            db.refresh(row)
            return row
        finally:
            db.close()

    def get_evolution(self, n: int, seed: int, density: float, beta: complex, delta: float, multiplier: float,
                      frame: str = "lab", steps: Optional[int] = None) -> Optional[EvolutionRow]:
        db = self.SessionLocal()
        try:
            return (
                db.query(EvolutionRow)
                .filter_by(multiplier=multiplier, frame=frame, requested_steps=steps or 0,
                           **_key_filter(n, seed, density, beta, delta))
                .first()
            )
        finally:
            db.close()

    def put_evolution(self, row: EvolutionRow) -> EvolutionRow:
        db = self.SessionLocal()
        try:
            db.add(row)
            db.commit()
            db.refresh(row)
            return row
        finally:
            db.close()

    def count(self, model) -> int:
        db = self.SessionLocal()
        try:
            return db.query(model).count()
        finally:
            db.close()
