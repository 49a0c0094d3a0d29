import logging

from servicebot.utils.terms import Compound, ListTerm, Symbol, is_op, print_term

logger = logging.getLogger(__name__)

_INDENT = 8
_WRAP = 6
_WIDTH = 40
_GLOBALS_HEAD = "Out Global Vars: ["
_SPEECH_ACTS = ("screen", "say")


class TraceRenderer:
    """Text rendering of a SitLog task history and golden-trace comparison."""

    @staticmethod
    def render_action(action):
        """Speech acts show their text as spoken; any other action prints canonically."""
        if isinstance(action, ListTerm):
            return "[" + ",".join(TraceRenderer.render_action(a) for a in action.elements) + "]"
        if (isinstance(action, Compound) and action.functor in _SPEECH_ACTS and action.arity == 1
                and isinstance(action.args[0], Symbol)):
            return f"{action.functor}({action.args[0].name})"
        return print_term(action)

    @staticmethod
    def _transition_parts(expectation, action):
        parts = [print_term(expectation) + ":"]
        if is_op(action, ":"):
            nested = TraceRenderer._transition_parts(*action.args)
            nested[0] = "(" + nested[0]
            nested[-1] += ")"
            return parts + nested
        return parts + [TraceRenderer.render_action(action)]

    @staticmethod
    def render_entry(entry):
        """
        Render one history entry as ``dm: (situation,expectation:action)``.

        Entries wider than the trace column break after each transition colon.

        Returns:
            list: The entry's lines, without the embedding indentation
        """
        parts = TraceRenderer._transition_parts(entry.expectation, entry.action)
        head = f"{entry.dm_id}: ({print_term(entry.situation_id)},"
        parts[0] = head + parts[0]
        parts[-1] += ")"
        if len("".join(parts)) <= _WIDTH:
            return ["".join(parts)]
        return [parts[0]] + [" " * _WRAP + p for p in parts[1:]]

    @staticmethod
    def render_history(history):
        """
        Render history entries, bracketing and indenting the blocks of embedded models.

        Args:
            history (list): HistoryEntry items in execution order

        Returns:
            list: Trace lines in execution order
        """
        lines = []
        depth = 0
        for entry in history:
            if entry.depth < depth and lines:
                lines[-1] += "]" * (depth - entry.depth)
            opens = max(entry.depth - depth, 0)
            indent = _INDENT * entry.depth
            first, *rest = TraceRenderer.render_entry(entry)
            lines.append(" " * (indent - opens) + "[" * opens + first)
            lines.extend(" " * indent + line for line in rest)
            depth = entry.depth
        if depth and lines:
            lines[-1] += "]" * depth
        return lines

    @staticmethod
    def render_globals(global_vars):
        items = [f"{name}==>{print_term(value)}" for name, value in global_vars.items()]
        if not items:
            return [_GLOBALS_HEAD + "]"]
        pad = " " * len(_GLOBALS_HEAD)
        lines = [_GLOBALS_HEAD + items[0]]
        lines.extend(pad + item for item in items[1:])
        return [line + "," for line in lines[:-1]] + [lines[-1] + "]"]

    @staticmethod
    def render(history, out_arg, global_vars):
        """Full trace: history lines, a blank line, then the Out Arg and Out Global Vars block."""
        lines = TraceRenderer.render_history(history)
        lines.append("")
        lines.append(f"Out Arg: {print_term(out_arg)}")
        lines.extend(TraceRenderer.render_globals(global_vars))
        return "\n".join(lines) + "\n"

    @staticmethod
    def normalize(text):
        """Lines with trailing whitespace removed; trailing blank lines at the end do not count."""
        return [line.rstrip() for line in text.rstrip().splitlines()]

    @staticmethod
    def compare(actual, golden):
        """
        Compare a trace against a golden one, ignoring trailing whitespace.

        Returns:
            tuple: (True, None) when equal, else (False, description of the first difference)
        """
        a = TraceRenderer.normalize(actual)
        b = TraceRenderer.normalize(golden)
        for number, (left, right) in enumerate(zip(a, b), start=1):
            if left != right:
                logger.info(f"Trace differs at line {number}")
                return False, f"line {number}: expected {right!r}, got {left!r}"
        if len(a) != len(b):
            return False, f"expected {len(b)} lines, got {len(a)}"
        return True, None
