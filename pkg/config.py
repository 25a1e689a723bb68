"""
Configuration Management
========================

Environment configuration for the narrowforge compilers.
Values come from the process environment (optionally a .env file).

Variables:
- NARROWFORGE_THREADS: worker cap for grid evaluation
- NARROWFORGE_SEED: default seed for every randomized step
- NARROWFORGE_DET_THRESHOLD: smallest singular value accepted as invertible
- NARROWFORGE_POSITIVITY_MARGIN: lower bound kept by positivity shifts
- NARROWFORGE_FIT_BETA / NARROWFORGE_FIT_MAX_TERMS: ridge fitting defaults
- NARROWFORGE_PWL_MAX_KNOTS: knot budget for piecewise linear approximation
- NARROWFORGE_SHARPEN_MAX_STEPS: sharpening iterations per slice
- NARROWFORGE_COMPILE_TIMEOUT: wall-clock budget for one compile, seconds
"""

import logging
import os
from dataclasses import dataclass, asdict
from typing import Optional, Dict, Any

try:
    from dotenv import load_dotenv
    DOTENV_AVAILABLE = True
except ImportError:
    DOTENV_AVAILABLE = False


def _env_bool(name: str, default: str = 'false') -> bool:
    return os.getenv(name, default).lower() == 'true'


@dataclass
class Config:
    """Compiler configuration"""

    # App settings
    app_name: str = "narrowforge"
    app_version: str = "1.0.0"
    debug: bool = False
    log_level: str = "INFO"

    # Parallelism / reproducibility
    threads: int = os.cpu_count() or 1
    seed: int = 0

    # Numerics
    det_threshold: float = 1e-12
    positivity_margin: float = 1.0
    fit_beta: float = 0.01
    fit_max_terms: int = 256
    pwl_max_knots: int = 4096
    sharpen_max_steps: int = 60

    # Budgets
    compile_timeout_seconds: int = 900

    @classmethod
    def from_env(cls) -> 'Config':
        """Load configuration from environment variables"""
        if DOTENV_AVAILABLE:
            load_dotenv()
        threads = int(os.getenv('NARROWFORGE_THREADS', str(cls.threads)))
        return cls(
            debug=_env_bool('NARROWFORGE_DEBUG'),
            log_level=os.getenv('NARROWFORGE_LOG_LEVEL', cls.log_level).upper(),

            threads=max(1, threads),
            seed=int(os.getenv('NARROWFORGE_SEED', '0')),

            det_threshold=float(os.getenv('NARROWFORGE_DET_THRESHOLD', '1e-12')),
            positivity_margin=float(os.getenv('NARROWFORGE_POSITIVITY_MARGIN', '1.0')),
            fit_beta=float(os.getenv('NARROWFORGE_FIT_BETA', '0.01')),
            fit_max_terms=int(os.getenv('NARROWFORGE_FIT_MAX_TERMS', '256')),
            pwl_max_knots=int(os.getenv('NARROWFORGE_PWL_MAX_KNOTS', '4096')),
            sharpen_max_steps=int(os.getenv('NARROWFORGE_SHARPEN_MAX_STEPS', '60')),

            compile_timeout_seconds=int(os.getenv('NARROWFORGE_COMPILE_TIMEOUT', '900')),
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert to a JSON-friendly dictionary"""
        return asdict(self)


# Global config instance
_config: Optional[Config] = None


def get_config() -> Config:
    """Get global configuration instance"""
    global _config
    if _config is None:
        _config = Config.from_env()
    return _config


def reload_config() -> Config:
    """Reload configuration from environment"""
    global _config
    _config = None
    return get_config()


def configure_logging(level: Optional[str] = None) -> None:
    """Configure root logging once (stderr, so JSON on stdout stays clean)."""
    cfg = get_config()
    name = (level or ('DEBUG' if cfg.debug else cfg.log_level)).upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
