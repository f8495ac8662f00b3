"""
Configuration module for the equilibrium toolkit
Handles environment variables, validation, and default numerical settings
"""

import os
import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

ENV_PREFIX = "VECEQUIL_"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class DiscretizationConfig:
    """Grid and factorization settings"""
    nodes_per_component: int = 400
    tol_psd: float = 1e-10
    tol_fac: float = 1e-12
    truncation_margin: float = 10.0

    def validate(self) -> bool:
        """Validate discretization configuration"""
        return (
            self.nodes_per_component >= 1 and
            self.tol_psd > 0 and
            self.tol_fac > 0 and
            self.truncation_margin >= 0
        )


@dataclass
class SolverConfig:
    """Frank-Wolfe settings"""
    max_iters: int = 20000
    gap_tol: float = 1e-6
    away_steps: bool = True
    seed: int = 0
    refresh_every: int = 500

    def validate(self) -> bool:
        """Validate solver configuration"""
        return self.max_iters >= 1 and self.gap_tol > 0 and self.refresh_every >= 1


@dataclass
class EquilibriumConfig:
    """Certification tolerances"""
    eq_tol: float = 5e-2
    boundary_tol: float = 1e-3
    mass_floor: float = 1e-9
    audit_density: int = 4

    def validate(self) -> bool:
        """Validate equilibrium configuration"""
        return (
            self.eq_tol > 0 and
            0 < self.boundary_tol <= 1 and
            0 <= self.mass_floor < 1 and
            self.audit_density >= 1
        )


@dataclass
class ApplicationConfig:
    """General application configuration"""
    log_level: str = "INFO"
    output_dir: str = "runs"
    cycle_limit: int = 1024

    def validate(self) -> bool:
        """Validate application configuration"""
        return self.log_level.upper() in LOG_LEVELS and bool(self.output_dir) and self.cycle_limit >= 1


def _env(name: str, default: str) -> str:
    return os.getenv(f"{ENV_PREFIX}{name}", default)


def _env_bool(name: str, default: bool) -> bool:
    return _env(name, "true" if default else "false").strip().lower() in ("1", "true", "yes", "on")


class ConfigManager:
    """
    Centralized configuration management
    Loads an optional .env file, reads VECEQUIL_* variables and validates every group
    """

    def __init__(self, env_file: Optional[str] = None):
        """
        Initialize configuration manager

        Args:
            env_file: Optional path to .env file
        """
        self.env_file = env_file or ".env"
        self._load_environment()
        self._load_configurations()
        self._validate_configurations()

    def _load_environment(self):
        """Load environment variables from .env file if it exists"""
        if os.path.exists(self.env_file):
            load_dotenv(self.env_file)
            logger.info(f"Loaded environment variables from {self.env_file}")
        else:
            logger.debug(f"Environment file {self.env_file} not found, using system environment variables")

    def _load_configurations(self):
        """Load all configuration objects from environment variables"""
        try:
            self.discretization = DiscretizationConfig(
                nodes_per_component=int(_env("NODES", "400")),
                tol_psd=float(_env("TOL_PSD", "1e-10")),
                tol_fac=float(_env("TOL_FAC", "1e-12")),
                truncation_margin=float(_env("TRUNCATION_MARGIN", "10.0")),
            )
            self.solver = SolverConfig(
                max_iters=int(_env("MAX_ITERS", "20000")),
                gap_tol=float(_env("GAP_TOL", "1e-6")),
                away_steps=_env_bool("AWAY_STEPS", True),
                seed=int(_env("SEED", "0")),
                refresh_every=int(_env("REFRESH_EVERY", "500")),
            )
            self.equilibrium = EquilibriumConfig(
                eq_tol=float(_env("EQ_TOL", "5e-2")),
                boundary_tol=float(_env("BOUNDARY_TOL", "1e-3")),
                mass_floor=float(_env("MASS_FLOOR", "1e-9")),
                audit_density=int(_env("AUDIT_DENSITY", "4")),
            )
            self.application = ApplicationConfig(
                log_level=_env("LOG_LEVEL", "INFO").upper(),
                output_dir=_env("OUTPUT_DIR", "runs"),
                cycle_limit=int(_env("CYCLE_LIMIT", "1024")),
            )
        except ValueError as e:
            logger.error(f"Malformed {ENV_PREFIX}* environment variable: {e}")
            raise

    def _validate_configurations(self):
        """Validate all configuration objects"""
        validation_results = {
            "discretization": self.discretization.validate(),
            "solver": self.solver.validate(),
            "equilibrium": self.equilibrium.validate(),
            "application": self.application.validate(),
        }

        failed_validations = [name for name, result in validation_results.items() if not result]

        if failed_validations:
            error_msg = f"Configuration validation failed for: {', '.join(failed_validations)}"
            logger.error(error_msg)
            raise ValueError(error_msg)

        logger.debug("All configurations validated successfully")

    def as_dict(self) -> Dict[str, Dict[str, Any]]:
        """All settings grouped by section"""
        return {
            "discretization": asdict(self.discretization),
            "solver": asdict(self.solver),
            "equilibrium": asdict(self.equilibrium),
            "application": asdict(self.application),
        }

    def overridden_variables(self) -> List[str]:
        """Names of VECEQUIL_* variables present in the environment"""
        return sorted(name for name in os.environ if name.startswith(ENV_PREFIX))

    def log_configuration_summary(self):
        """Log a summary of current configuration"""
        logger.info("Configuration Summary:")
        for section, values in self.as_dict().items():
            logger.info(f"  {section}: " + ", ".join(f"{k}={v}" for k, v in values.items()))
        overridden = self.overridden_variables()
        if overridden:
            logger.info(f"  Environment overrides: {', '.join(overridden)}")


# Global configuration instance
config_manager: Optional[ConfigManager] = None


def get_config() -> ConfigManager:
    """Get global configuration manager instance"""
    global config_manager
    if config_manager is None:
        config_manager = ConfigManager()
    return config_manager


def reset_config():
    """Drop the cached instance so the next get_config() rereads the environment"""
    global config_manager
    config_manager = None
