import json
from typing import Any

from anyio import to_thread
from mcp.server import Server
from mcp.server.stdio import stdio_server
from mcp.types import Resource, TextContent, Tool

from .config.store import RunConfig, get_run_history, load_run_config
from .errors import ConfigurationError
from .tasks.registry import list_tasks
from .tools.ablate import ablate, list_variants
from .tools.build_pyramid import build_pyramid
from .tools.detect_periods import detect_periods
from .tools.gradcheck import TOLERANCE, gradcheck
from .tools.pipeline import finish
from .tools.run_task import run_task, train_model
from .tools.sweep import sweep_k, sweep_lookback

server = Server("perimid")

# Per-section settings accepted by every run-based tool
SETTINGS_SCHEMA = {
    section: {
        "type": "object",
        "description": f"Overrides for the [{section}] section",
    }
    for section in ("model", "train", "task", "data", "output")
}
RUN_PROPERTIES = {
    "config_path": {"type": "string", "description": "INI file applied before the overrides"},
    **SETTINGS_SCHEMA,
}


def _run_tool(name: str, description: str, **extra: Any) -> Tool:
    return Tool(
        name=name,
        description=description,
        inputSchema={"type": "object", "properties": {**RUN_PROPERTIES, **extra}},
    )


def run_config(arguments: dict[str, Any], task: str | None = None) -> RunConfig:
    """Build a RunConfig from tool arguments: config_path, then per-section overrides."""
    overrides = {section: dict(arguments.get(section) or {}) for section in SETTINGS_SCHEMA}
    if task is not None:
        overrides["task"]["kind"] = task
    return load_run_config(arguments.get("config_path"), overrides)


@server.list_tools()
async def handle_list_tools() -> list[Tool]:
    """List available tools."""
    return [
        _run_tool(
            "detect_periods",
            "Detect the k dominant periods of a series (CSV or synthetic)",
            start={"type": "integer", "description": "Window start; omit for the whole series"},
        ),
        _run_tool(
            "build_pyramid",
            "Build the periodic pyramid, inclusion relation, mask and feature flows of a window",
            start={"type": "integer", "default": 0},
            checkpoint={"type": "string", "description": "Trained model to take periods from"},
            attention_csv={"type": "string", "description": "Write attention weights here"},
            mask_csv={"type": "string", "description": "Write the 0/1 attention mask here"},
        ),
        _run_tool("train", "Train a model and report validation metrics"),
        _run_tool(
            "run_task",
            "Train (or reuse output.checkpoint) and evaluate a task on the test split",
            task={"type": "string", "enum": list_tasks()},
        ),
        _run_tool(
            "sweep_k",
            "Test metrics across pyramid depths k",
            k_min={"type": "integer", "default": 2},
            k_max={"type": "integer", "default": 5},
            table={"type": "string", "description": "CSV path for the per-k table"},
        ),
        _run_tool(
            "sweep_lookback",
            "Test metrics across input lengths L",
            lengths={"type": "array", "items": {"type": "integer"}},
            table={"type": "string", "description": "CSV path for the per-L table"},
        ),
        _run_tool(
            "ablate",
            "Compare the full model against its ablation variants",
            variants={"type": "array", "items": {"type": "string", "enum": list_variants()}},
            seeds={"type": "array", "items": {"type": "integer"}},
            table={"type": "string", "description": "CSV path for the per-run table"},
        ),
        Tool(
            name="gradcheck",
            description="Finite-difference gradient check of a small forecasting model",
            inputSchema={
                "type": "object",
                "properties": {
                    "seed": {"type": "integer", "default": 0},
                    "tolerance": {"type": "number", "default": TOLERANCE},
                },
            },
        ),
    ]


def call_tool(name: str, arguments: dict[str, Any]) -> dict[str, Any]:
    """Dispatch one tool call; configuration problems come back as failed results."""
    try:
        if name == "gradcheck":
            return gradcheck(
                seed=arguments.get("seed", 0),
                tolerance=arguments.get("tolerance", TOLERANCE),
            )
        if name == "detect_periods":
            return detect_periods(run_config(arguments), start=arguments.get("start"))
        if name == "build_pyramid":
            return build_pyramid(
                run_config(arguments),
                start=arguments.get("start", 0),
                checkpoint=arguments.get("checkpoint"),
                attention_csv=arguments.get("attention_csv"),
                mask_csv=arguments.get("mask_csv"),
            )
        if name == "train":
            return train_model(run_config(arguments))
        if name == "run_task":
            return run_task(run_config(arguments, arguments.get("task")))
        if name == "sweep_k":
            return sweep_k(
                run_config(arguments),
                arguments.get("k_min", 2),
                arguments.get("k_max", 5),
                arguments.get("table"),
            )
        if name == "sweep_lookback":
            return sweep_lookback(
                run_config(arguments),
                arguments.get("lengths", [48, 96, 192]),
                arguments.get("table"),
            )
        if name == "ablate":
            return ablate(
                run_config(arguments),
                arguments.get("variants"),
                arguments.get("seeds"),
                arguments.get("table"),
            )
    except ConfigurationError as e:
        return {"success": False, "error": str(e)}
    return {"success": False, "error": f"Unknown tool: {name}"}


@server.call_tool()
async def handle_call_tool(name: str, arguments: dict) -> list[TextContent]:
    """Handle tool calls on a worker thread."""
    arguments = arguments or {}
    result = await to_thread.run_sync(call_tool, name, arguments)
    out = (arguments.get("output") or {}).get("out")
    await to_thread.run_sync(finish, name, result, out)
    return [TextContent(type="text", text=json.dumps(result, indent=2, default=str))]


@server.list_resources()
async def handle_list_resources() -> list[Resource]:
    """List available resources."""
    return [
        Resource(
            uri="perimid://config",
            name="Perimid Configuration",
            description="Effective default run configuration",
            mimeType="application/json",
        ),
        Resource(
            uri="perimid://recent-runs",
            name="Recent Runs",
            description="History of runs that wrote a report",
            mimeType="application/json",
        ),
    ]


@server.read_resource()
async def handle_read_resource(uri: str) -> str:
    """Read a resource."""
    if str(uri) == "perimid://config":
        return json.dumps(RunConfig().to_dict(), indent=2)
    elif str(uri) == "perimid://recent-runs":
        return json.dumps({"runs": get_run_history()}, indent=2)
    else:
        return json.dumps({"error": f"Unknown resource: {uri}"})


def main():
    """Run the MCP server."""
    import asyncio

    async def run():
        async with stdio_server() as (read_stream, write_stream):
            await server.run(read_stream, write_stream, server.create_initialization_options())

    asyncio.run(run())


if __name__ == "__main__":
    main()
