"""Prompt templates: agent system prompt, direct-answer probe, judge grading."""

from __future__ import annotations

import json
import re

from .tooldefs import ToolSchema, openai_tool_schemas

_SYSTEM_PROMPT_HEADER = """You are a helpful assistant. You can call functions to assist with the user query.

Important: You must call only one function at a time. After each function call, wait for the execution result before making the next function call if needed.

# Tools

You may call one or more functions to assist with the user query.

You are provided with function signatures within <tools></tools> XML tags:

<tools>
{tool_schemas}
</tools>

For each function call, return a json object with function name and arguments within <tool_call></tool_call> XML tags:

<tool_call>
{"name": <function-name>, "arguments": <args-json-object>}
</tool_call>

# Workflow and Output Format

You must follow these steps in order. In every conversation turn, you start from Step 1.

Step 1: Think (Plan)
- This is the starting point for every turn.
- Analyze the user's query and all available information (including previous observations) carefully.
- Formulate a plan. Your plan must decide on one of two courses of action:
  1. Call a tool: If you need more information.
  2. Provide a final answer: If you have sufficient information.
- Your entire reasoning process must be enclosed in <think>...</think> tags.

Step 2: Act (Tool Call)
- Execute this step ONLY if your Step 1 plan was to call a tool.
- Call the one single tool decided upon in your plan.
- The tool call must be enclosed in <tool_call>...</tool_call> tags.
- Important: If you call a tool, you must STOP and wait for the observation. Do NOT proceed to Step 4.

Step 3: Observe (Tool Output)
- You will only enter this step after a tool call.
- You will receive the tool's output (observation).
- After receiving the output, you MUST go back to Step 1 (Think) to analyze the new information and decide the next step (e.g., call another tool or provide the final answer).

Step 4: Answer (Final Response)
- Execute this step ONLY if your Step 1 plan was to provide a final answer.
- In your Step 1 Think block, you must have already synthesized all information and planned the content of your response.
- Formulate the comprehensive, detailed, and user-facing final answer based on that plan.
- Your final answer must be enclosed in <answer>...</answer> tags.

Here is the question and image:"""


def build_system_prompt(
    question: str, image_ref: str, registry: dict[str, ToolSchema] | None = None
) -> str:
    schemas = "\n".join(
        json.dumps(schema, ensure_ascii=False) for schema in openai_tool_schemas(registry)
    )
    header = _SYSTEM_PROMPT_HEADER.replace("{tool_schemas}", schemas)
    return f"{header}\nQuestion: {question}\nImage: {image_ref}"


DIRECT_ANSWER_PROMPT = "Based on the image, answer the question. Here is the question and image:"


def build_direct_prompt(question: str, image_ref: str) -> str:
    return f"{DIRECT_ANSWER_PROMPT}\nQuestion: {question}\nImage: {image_ref}"


JUDGE_PROMPT_TEMPLATE = """Judge whether the following [response] to [question] is correct or not based on the precise and unambiguous [correct_answer] below.

[question]: {question}

[response]: {response}

Your judgement must be in the format and criteria specified below:

extracted_final_answer: The final exact answer extracted from the [response]. Put the extracted answer as 'None' if there is no exact, final answer to extract from the response.

[correct_answer]: {correct_answer}

reasoning: Explain why the extracted_final_answer is correct or incorrect based on [correct_answer], focusing only on if there are meaningful differences between [correct_answer] and the extracted_final_answer. Do not comment on any background to the problem, do not attempt to solve the problem, do not argue for any answer different than [correct_answer], focus only on whether the answers match.

correct: Answer 'yes' if extracted_final_answer matches the [correct_answer] given above, or is within a small margin of error for numerical problems. Answer 'no' otherwise, i.e. if there if there is any inconsistency, ambiguity, non-equivalency, or if the extracted answer is incorrect.

confidence: The extracted confidence score between 0% and 100% from [response]. Put 100 if there is no confidence score available."""

_JUDGE_SLOT_RE = re.compile(r"\{(question|response|correct_answer)\}")


def render_judge_prompt(question: str, response: str, correct_answer: str) -> str:
    """Single-pass substitution; field contents are inserted literally."""
    values = {"question": question, "response": response, "correct_answer": correct_answer}
    return _JUDGE_SLOT_RE.sub(lambda m: values[m.group(1)], JUDGE_PROMPT_TEMPLATE)
