"""DOT rendering of a program's execution tree.

Leaves are the executed actions in order; internal nodes are subroutine
calls. Edges from a call to its constituent instructions are solid on the
subroutine's first use and dashed on subsequent uses.
"""

from __future__ import annotations

from .errors import NotSolvedError
from .program import Budget, DEFAULT_BUDGET, ExecRecord, Program, execute_traced
from .task import TaskSpec


def render_tree(p: Program, task: TaskSpec, budget: Budget = DEFAULT_BUDGET) -> str:
    record = ExecRecord()
    result = execute_traced(task, p, budget, record)
    if not result.solved:
        raise NotSolvedError(f"program does not solve task {task.id!r}")

    lines = [
        "digraph program {",
        "  graph [ordering=out];",
        "  node [fontname=monospace];",
        '  n0 [label="main" shape=box];',
    ]
    counter = [0]
    seen_subs: set[int] = set()

    def emit(parent: str, nodes: list, style: str) -> None:
        for node in nodes:
            counter[0] += 1
            name = f"n{counter[0]}"
            if node[0] == "action":
                lines.append(f'  {name} [label="{node[1].token}" shape=plaintext];')
                lines.append(f"  {parent} -> {name} [style={style}];")
            else:
                _, k, children = node
                child_style = "solid" if k not in seen_subs else "dashed"
                seen_subs.add(k)
                lines.append(f'  {name} [label="p{k}" shape=box];')
                lines.append(f"  {parent} -> {name} [style={style}];")
                emit(name, children, child_style)

    emit("n0", record.call_tree, "solid")
    lines.append("}")
    return "\n".join(lines) + "\n"
