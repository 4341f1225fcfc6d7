#!/usr/bin/env python3
"""
TTSA Lab MCP Server

Servidor MCP que expone el laboratorio de aproximación estocástica de dos
escalas temporales como 6 herramientas:
- 2 herramientas de problema (solución exacta y validación de supuestos)
- 3 herramientas de experimentos (simulación, tasas gaussianas, covarianzas)
- 1 herramienta de aprendizaje por refuerzo (instancias GTD(0)/TDC)

Cada herramienta recibe un objeto de configuración con el mismo esquema que
los archivos JSON de `configs/` y devuelve el resumen del comando en JSON.

Version: 1.0.0
"""

import json
import logging
from pathlib import Path

from mcp.server import Server
from mcp.types import Tool, TextContent
from mcp.server.stdio import stdio_server

from src.cli import ExperimentConfig, LabCommands, to_jsonable
from src.config import Config, setup_logging
from src.linalg import eig_check_hurwitz
from src.model import TtsaProblem, build_oracle, solve_exact, validate_assumptions

logger = logging.getLogger("ttsa_lab.server")

# Inicializar el servidor MCP con identificador único
server = Server("ttsa-lab-server")

# Esquema compartido de los argumentos de los comandos de experimento
EXPERIMENT_SCHEMA = {
    "type": "object",
    "properties": {
        "config": {
            "type": "object",
            "description": "Experiment definition (same schema as the JSON config files)"
        },
        "seed": {
            "type": "integer",
            "description": "64-bit experiment seed (defaults to the config seed, then TTSA_LAB_SEED)"
        },
        "threads": {
            "type": "integer",
            "description": "Worker processes for the Monte Carlo replications"
        },
        "strict": {
            "type": "boolean",
            "description": "Raise on failed assumption or acceptance checks"
        },
        "out": {
            "type": "string",
            "description": "Artifact directory (default: <TTSA_LAB_OUTPUT_DIR>/<config hash>)"
        }
    },
    "required": ["config"]
}


@server.list_tools()
async def list_tools() -> list[Tool]:
    """
    Lista todas las herramientas MCP disponibles.

    Returns:
        list[Tool]: Lista de 6 objetos Tool con nombre, descripción y inputSchema.

    Note:
        Las descripciones DEBEN estar en inglés.
    """
    return [
        # Problem Tools (2)
        Tool(
            name="solve_problem",
            description="Solve the linear TTSA system exactly: theta*, w*, Delta = A11 - A12 A22^{-1} A21 and Hurwitz diagnostics.",
            inputSchema={
                "type": "object",
                "properties": {
                    "problem": {
                        "type": "object",
                        "description": "Matrices a11, a12, a21, a22 and vectors b1, b2"
                    }
                },
                "required": ["problem"]
            }
        ),
        Tool(
            name="validate_problem",
            description="Check the stability, boundedness, centering and covariance assumptions of a problem paired with a noise oracle.",
            inputSchema={
                "type": "object",
                "properties": {
                    "problem": {
                        "type": "object",
                        "description": "Matrices a11, a12, a21, a22 and vectors b1, b2"
                    },
                    "oracle": {
                        "type": "object",
                        "description": "Noise oracle block: deterministic, martingale or markov"
                    }
                },
                "required": ["problem"]
            }
        ),

        # Experiment Tools (3)
        Tool(
            name="simulate",
            description="Run TTSA trajectories and the mean-squared-error table across k; writes trajectory CSVs and summary.json.",
            inputSchema=EXPERIMENT_SCHEMA
        ),
        Tool(
            name="measure_rates",
            description="Measure Gaussian-approximation distances of the averaged and last iterates across an n-grid and fit the log-log rate.",
            inputSchema=EXPERIMENT_SCHEMA
        ),
        Tool(
            name="covariance_report",
            description="Exact target covariances, limit candidates and the convergence gap of the normalized finite sums.",
            inputSchema=EXPERIMENT_SCHEMA
        ),

        # Reinforcement Learning Tools (1)
        Tool(
            name="rl_instance",
            description="Build GTD(0) or TDC on a finite MDP as a TTSA instance, evaluate the policy exactly and run the delegated command.",
            inputSchema=EXPERIMENT_SCHEMA
        ),
    ]


def run_command(command: str, arguments: dict) -> dict:
    """
    Ejecuta un comando del laboratorio con una configuración en línea.

    Args:
        command: "simulate", "rates", "covariance" o "rl"
        arguments: argumentos de la herramienta (config, seed, threads, strict, out)

    Returns:
        dict: resumen del comando más la lista de artefactos escritos
    """
    config = ExperimentConfig.from_dict(arguments["config"])
    out = arguments.get("out") or str(Path(Config.OUTPUT_DIR) / config.config_hash)
    commands = LabCommands(config, seed=arguments.get("seed"), out_dir=out,
                           threads=arguments.get("threads"),
                           strict=bool(arguments.get("strict", False)))
    summary = commands.dispatch(command)
    return {**summary, "artifacts": [str(Path(out) / name) for name in commands.writer.written]}


@server.call_tool()
async def call_tool(name: str, arguments: dict) -> list[TextContent]:
    """
    Maneja las llamadas a las herramientas MCP.

    Args:
        name (str): Nombre de la herramienta a ejecutar (ej: "simulate")
        arguments (dict): Parámetros de la herramienta

    Returns:
        list[TextContent]: resultado en JSON, o un objeto de error en JSON si
                          ocurrió una excepción

    Raises:
        No lanza excepciones directamente, todas se capturan y se devuelven como JSON.
    """

    try:
        # ============================================================
        # PROBLEM TOOLS (2)
        # ============================================================

        if name == "solve_problem":
            problem = TtsaProblem.from_dict(arguments["problem"])
            solution = solve_exact(problem)
            result = {
                **solution.to_dict(),
                "delta": problem.delta,
                "a22_hurwitz": eig_check_hurwitz(problem.a22).is_hurwitz,
                "delta_hurwitz": eig_check_hurwitz(problem.delta).is_hurwitz,
            }

        elif name == "validate_problem":
            problem = TtsaProblem.from_dict(arguments["problem"])
            oracle = build_oracle(arguments.get("oracle"), problem)
            result = validate_assumptions(problem, oracle).to_dict()

        # ============================================================
        # EXPERIMENT TOOLS (3)
        # Cada una delega en LabCommands y escribe sus artefactos
        # ============================================================

        elif name == "simulate":
            result = run_command("simulate", arguments)

        elif name == "measure_rates":
            result = run_command("rates", arguments)

        elif name == "covariance_report":
            result = run_command("covariance", arguments)

        # ============================================================
        # REINFORCEMENT LEARNING TOOLS (1)
        # ============================================================

        elif name == "rl_instance":
            result = run_command("rl", arguments)

        else:
            # Herramienta desconocida
            raise ValueError(f"Unknown tool: {name}")

        return [TextContent(type="text", text=json.dumps(to_jsonable(result), indent=2))]

    except Exception as e:
        # Capturar cualquier error y devolverlo en formato JSON
        logger.warning("Tool %s failed: %s", name, e)
        error_result = {
            "error": str(e),
            "tool": name,
            "arguments": to_jsonable(arguments)
        }
        return [TextContent(type="text", text=json.dumps(error_result, indent=2))]


async def main():
    """
    Función principal que inicia el servidor MCP sobre stdio.

    El logging va a stderr; stdout queda reservado para el protocolo.
    """
    setup_logging()
    async with stdio_server() as (read_stream, write_stream):
        await server.run(
            read_stream,
            write_stream,
            server.create_initialization_options()
        )


if __name__ == "__main__":
    # Punto de entrada cuando se ejecuta directamente: python server.py
    import asyncio
    asyncio.run(main())
