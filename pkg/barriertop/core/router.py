from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional


@dataclass
class CommandRouter:
    """One CLI command: a name, help text and the handler run per config."""

    name: str
    help: str = ""
    handler: Optional[Callable] = None
    # extra artifacts a command announces in its help text
    artifacts: List[str] = field(default_factory=list)

    def command(self, fn: Callable) -> Callable:
        self.handler = fn
        return fn


class CommandApp:
    """Registry of command routers, filled by include_router like the HTTP app it mirrors."""

    def __init__(self, title: str, version: str):
        self.title = title
        self.version = version
        self.routers: Dict[str, CommandRouter] = {}

    def include_router(self, router: CommandRouter) -> None:
        if router.name in self.routers:
            raise ValueError(f"command '{router.name}' registered twice")
        if router.handler is None:
            raise ValueError(f"command '{router.name}' has no handler")
        self.routers[router.name] = router

    def get(self, name: str) -> CommandRouter:
        return self.routers[name]
