"""The two agent tools and their function-calling schemas."""

from __future__ import annotations

from dataclasses import dataclass

SEARCH_TOOL_NAME = "search"
IMAGE_TOOL_NAME = "web_image_to_image_search"


@dataclass(frozen=True)
class ToolSchema:
    name: str
    description: str
    parameters: dict
    required: tuple[str, ...]

    def to_openai(self) -> dict:
        parameters = dict(self.parameters)
        parameters["required"] = list(self.required)
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": parameters,
            },
        }


SEARCH_TOOL = ToolSchema(
    name=SEARCH_TOOL_NAME,
    description="Searches the web for relevant information based on the given query.",
    parameters={
        "type": "object",
        "properties": {
            "query_list": {
                "type": "array",
                "items": {"type": "string"},
                "description": (
                    "A list of complete textual queries. Each query must clearly "
                    "state the topic without referring to images."
                ),
            }
        },
    },
    required=("query_list",),
)

IMAGE_TOOL = ToolSchema(
    name=IMAGE_TOOL_NAME,
    description=(
        "**IMPORTANT: This tool can only be called once.** Searches for relevant "
        "images based on the original image using web search."
    ),
    parameters={"type": "object", "properties": {}},
    required=(),
)


def default_registry() -> dict[str, ToolSchema]:
    return {SEARCH_TOOL.name: SEARCH_TOOL, IMAGE_TOOL.name: IMAGE_TOOL}


def openai_tool_schemas(registry: dict[str, ToolSchema] | None = None) -> list[dict]:
    registry = registry if registry is not None else default_registry()
    return [schema.to_openai() for schema in registry.values()]
