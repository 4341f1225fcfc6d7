"""
Módulo de configuración para el laboratorio TTSA.

Este módulo centraliza todas las configuraciones del laboratorio, incluyendo:
- Semilla por defecto y número de procesos de trabajo
- Directorio de salida de artefactos
- Nivel de logging
- Tamaño de bloque de réplicas (flujos RNG)
- Tolerancias numéricas compartidas por todos los módulos

Las configuraciones se cargan desde variables de entorno definidas en el archivo .env;
las tolerancias numéricas son constantes fijas y no se leen del entorno.
"""
import logging
import os
import sys

from dotenv import load_dotenv

# Cargar variables de entorno desde el archivo .env en la raíz del proyecto
load_dotenv()

logger = logging.getLogger(__name__)


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        return -1


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError:
        return float("nan")


class Config:
    """
    Clase de configuración centralizada para el laboratorio.

    Todos los módulos importan esta clase para acceder a configuraciones
    y tolerancias. Los valores de entorno se leen una sola vez al importar.

    Attributes:
        SEED (int): Semilla por defecto de los experimentos
        THREADS (int): Procesos de trabajo para las réplicas Monte Carlo
        OUTPUT_DIR (str): Directorio donde se escriben los artefactos
        LOG_LEVEL (str): Nivel de logging (DEBUG, INFO, WARNING, ERROR)
        REPLICATION_BLOCK (int): Réplicas por flujo RNG; fija el resultado
            independientemente del número de procesos
        DIRECTIONS (int): Direcciones cuasi-aleatorias para proj-ks / sw1
        BOOTSTRAP (int): Remuestreos bootstrap para errores estándar
        C_A5 (float): Constante C de la condición k0 >= C·p^{4/b}

    Example:
        >>> from src.config import Config
        >>> Config.HURWITZ_TOL
        1e-09
        >>> Config.validate()
        True
    """

    # ============================================================
    # EXPERIMENTOS (cargar desde archivo .env)
    # ============================================================
    SEED = _env_int("TTSA_LAB_SEED", 20250101)
    THREADS = _env_int("TTSA_LAB_THREADS", os.cpu_count() or 1)
    OUTPUT_DIR = os.getenv("TTSA_LAB_OUTPUT_DIR", "results")
    LOG_LEVEL = os.getenv("TTSA_LAB_LOG_LEVEL", "INFO").upper()

    # ============================================================
    # MONTE CARLO (bloques de réplicas y métricas)
    # ============================================================
    REPLICATION_BLOCK = _env_int("TTSA_LAB_REPLICATION_BLOCK", 512)
    DIRECTIONS = _env_int("TTSA_LAB_DIRECTIONS", 64)
    BOOTSTRAP = _env_int("TTSA_LAB_BOOTSTRAP", 200)
    MIN_REPLICATIONS = 100  # mínimo para experimentos de distancia
    MAX_DIVERGED_FRACTION = 0.01  # más de 1% de réplicas divergentes aborta

    # ============================================================
    # DIAGNÓSTICOS DE PASOS (constante de A5)
    # ============================================================
    C_A5 = _env_float("TTSA_LAB_C_A5", 1.0)

    # ============================================================
    # TOLERANCIAS NUMÉRICAS (fijas)
    # ============================================================
    HURWITZ_TOL = 1e-9  # parte real mínima aceptada
    LYAPUNOV_RESIDUAL_TOL = 1e-10
    SYMMETRY_TOL = 1e-12
    SOLUTION_RESIDUAL_TOL = 1e-10
    SINGULAR_CONDITION = 1e12  # número de condición máximo de A22 y Δ
    DECOUPLING_CONDITION_GUARD = 1e10  # guardia de (I − β_k U_k)
    DIVERGENCE_THRESHOLD = 1e12  # ‖θ‖ o ‖w‖ por encima de esto es divergencia
    STOCHASTIC_TOL = 1e-12  # filas del kernel suman 1
    STATIONARY_TOL = 1e-10
    MIN_SPECTRAL_GAP = 1e-6
    POISSON_RESIDUAL_TOL = 1e-10
    MEAN_TOL = 1e-10  # E_π[A_ij(X)] = A_ij
    POINT_MASS_TOL = 1e-10  # nube y objetivo concentrados en 0

    @classmethod
    def validate(cls):
        """
        Valida que las variables de entorno tengan valores utilizables.

        Este método se ejecuta automáticamente al importar el módulo
        para detectar problemas de configuración tempranamente.

        Returns:
            bool: True si todas las validaciones pasan

        Raises:
            ValueError: Si alguna variable tiene un valor inválido
        """
        errors = []

        if cls.SEED < 0:
            errors.append("TTSA_LAB_SEED must be a non-negative integer")
        if cls.THREADS < 1:
            errors.append("TTSA_LAB_THREADS must be a positive integer")
        if cls.REPLICATION_BLOCK < 1:
            errors.append("TTSA_LAB_REPLICATION_BLOCK must be a positive integer")
        if cls.DIRECTIONS < 1:
            errors.append("TTSA_LAB_DIRECTIONS must be a positive integer")
        if cls.BOOTSTRAP < 1:
            errors.append("TTSA_LAB_BOOTSTRAP must be a positive integer")
        if not cls.C_A5 > 0:
            errors.append("TTSA_LAB_C_A5 must be a positive number")
        if cls.LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            errors.append(f"TTSA_LAB_LOG_LEVEL '{cls.LOG_LEVEL}' is not a logging level")

        # Si hay errores, lanzar excepción con todos los problemas encontrados
        if errors:
            raise ValueError(f"Configuration errors: {', '.join(errors)}")

        return True


def setup_logging(level: str = None) -> None:
    """
    Configura el logging raíz hacia stderr.

    stdout queda libre para el protocolo MCP del servidor.

    Args:
        level: Nivel de logging; por defecto Config.LOG_LEVEL
    """
    logging.basicConfig(
        level=getattr(logging, (level or Config.LOG_LEVEL).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


# ============================================================
# VALIDACIÓN AUTOMÁTICA AL IMPORTAR
# Si alguna variable es inválida, registra un warning pero no detiene la ejecución
# ============================================================
try:
    Config.validate()
except ValueError as e:
    logger.warning("%s", e)
