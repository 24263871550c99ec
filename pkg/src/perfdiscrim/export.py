"""Render a serialized analysis report as a Graphviz DOT tree."""
from __future__ import annotations


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _num(v: float) -> str:
    return f"{v:.6g}"


def model_formula(model: dict, input_names, output_name: str = "y") -> str:
    """``y = a·x + c`` with one term per input."""
    terms = [f"{_num(a)}·{name}" for a, name in zip(model["slope"], input_names)]
    terms.append(_num(model["intercept"]))
    return f"{output_name} = " + " + ".join(terms).replace("+ -", "- ")


def report_to_dot(report: dict) -> str:
    """DOT text for ``report["tree"]``; nodes are numbered in pre-order."""
    inputs = report.get("input_names") or [f"x{k}" for k in range(len(report["models"][0]["slope"]))]
    output = report.get("output_name", "y")
    models = report["models"]
    lines = [
        "digraph discriminant {",
        '  node [shape=box, fontname="Helvetica"];',
        '  edge [fontname="Helvetica"];',
    ]
    edges = []
    counter = 0

    def visit(node) -> int:
        nonlocal counter
        me = counter
        counter += 1
        if node["leaf"]:
            dist = ", ".join(f"{p:.3f}" for p in node["distribution"])
            label = (
                f"{model_formula(models[node['label']], inputs, output)}\n"
                f"d = [{dist}]\nn = {node['support']}"
            )
            lines.append(f"  n{me} [label={_quote(label)}, style=rounded];")
            return me
        lines.append(f"  n{me} [label={_quote(node['feature'])}];")
        t = _num(node["threshold"])
        for side, op in (("left", "≤ "), ("right", "> ")):
            edges.append(f"  n{me} -> n{counter} [label={_quote(op + t)}];")
            visit(node[side])
        return me

    visit(report["tree"])
    lines += edges
    lines.append("}")
    return "\n".join(lines) + "\n"
