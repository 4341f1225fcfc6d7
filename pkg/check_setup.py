#!/usr/bin/env python3
"""
Script to verify the installation and configuration
"""

import asyncio

from dotenv import load_dotenv

from src.config import Config
from src.engine import TtsaEngine, make_stream
from src.model import TtsaProblem, build_oracle, solve_exact, validate_assumptions
from src.schedule import StepSchedule

load_dotenv()

SMOKE_PROBLEM = {
    "a11": [[1.5]], "a12": [[0.5]], "a21": [[1.0]], "a22": [[1.0]],
    "b1": [1.0], "b2": [0.5],
}


def check_config():
    """Check configuration"""
    print("=" * 50)
    print("Checking Configuration")
    print("=" * 50)

    try:
        Config.validate()
        print("✓ Configuration is valid")
        print(f"  - Seed: {Config.SEED}")
        print(f"  - Threads: {Config.THREADS}")
        print(f"  - Output directory: {Config.OUTPUT_DIR}")
        return True
    except Exception as e:
        print(f"✗ Configuration error: {e}")
        return False


def check_numerics():
    """Check the exact solver and a short noisy run"""
    print("\n" + "=" * 50)
    print("Checking Numerics")
    print("=" * 50)

    try:
        problem = TtsaProblem.from_dict(SMOKE_PROBLEM)
        oracle = build_oracle({"type": "martingale", "family": "perturbation",
                               "directions": [{"b1": [1.0]}, {"b2": [1.0]}]}, problem)
        solution = solve_exact(problem)
        report = validate_assumptions(problem, oracle)
        schedule = StepSchedule(a_exp=0.6, b_exp=0.75, c0_gamma=1.0, c0_beta=0.5, k0=10.0)
        record = TtsaEngine(problem, oracle, schedule).run(4096, make_stream(Config.SEED, 0))

        print("✓ Numerics OK")
        print(f"  - theta*: {solution.theta_star.tolist()}")
        print(f"  - Assumption checks passed: {report.ok}")
        print(f"  - theta_bar after 4096 steps: {record.final.theta_bar.tolist()}")
        print(f"  - Max averaging identity residual: {record.identity_residual_max:.2e}")
        return report.ok
    except Exception as e:
        print(f"✗ Numerics failed: {e}")
        return False


def check_server():
    """Check the MCP server tool list"""
    print("\n" + "=" * 50)
    print("Checking MCP Server")
    print("=" * 50)

    try:
        from server import list_tools

        tools = asyncio.run(list_tools())
        print("✓ MCP server loaded")
        print(f"  - Tools: {', '.join(t.name for t in tools)}")
        return len(tools) == 6
    except Exception as e:
        print(f"✗ MCP server failed to load: {e}")
        return False


def main():
    """Run all checks"""
    print("\n" + "=" * 50)
    print("TTSA Lab - Setup Check")
    print("=" * 50 + "\n")

    results = []

    results.append(("Configuration", check_config()))
    results.append(("Numerics", check_numerics()))
    results.append(("MCP Server", check_server()))

    # Print summary
    print("\n" + "=" * 50)
    print("Check Summary")
    print("=" * 50)

    for name, success in results:
        status = "✓ PASS" if success else "✗ FAIL"
        print(f"{status} - {name}")

    all_passed = all(result[1] for result in results)

    print("\n" + "=" * 50)
    if all_passed:
        print("✓ All checks passed! The lab is ready to use.")
    else:
        print("✗ Some checks failed. Please check your installation.")
    print("=" * 50 + "\n")

    return 0 if all_passed else 1


if __name__ == "__main__":
    import sys
    sys.exit(main())
