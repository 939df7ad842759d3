"""`python -m sentrybot {sim|server|agent} ...` dispatcher."""

import sys

from .cli import agent_main, server_main, sim_main

_COMMANDS = {"sim": sim_main, "server": server_main, "agent": agent_main}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in _COMMANDS:
        names = "|".join(_COMMANDS)
        print(f"usage: python -m sentrybot {{{names}}} [options]", file=sys.stderr)
        return 2
    return _COMMANDS[argv[0]](argv[1:])


if __name__ == "__main__":
    sys.exit(main())
