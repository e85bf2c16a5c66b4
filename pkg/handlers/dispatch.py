"""
Command routing for experiment runs.

Mirrors the router/middleware layout of a chat-bot dispatcher: each command
module owns a Router, the Dispatcher includes them and wraps every call in
the registered middlewares (outermost first).
"""
import logging
from typing import Any, Callable, Dict

from analysis.errors import ConfigError
from storage.models import ExperimentConfig, RunOutcome

Handler = Callable[[ExperimentConfig, Dict[str, Any]], RunOutcome]


class BaseMiddleware:
    """Wraps a handler call; subclasses must call `handler` to continue."""
    def __call__(self, handler: Handler, config: ExperimentConfig, data: Dict[str, Any]) -> RunOutcome:
        return handler(config, data)


class Router:
    def __init__(self):
        self.handlers: Dict[str, Handler] = {}

    def command(self, name: str) -> Callable[[Handler], Handler]:
        def register(fn: Handler) -> Handler:
            self.handlers[name] = fn
            return fn
        return register


class Dispatcher:
    def __init__(self):
        self.handlers: Dict[str, Handler] = {}
        self.middlewares: list[BaseMiddleware] = []

    def include_router(self, router: Router) -> None:
        for name, fn in router.handlers.items():
            if name in self.handlers:
                raise ValueError(f"Command '{name}' is registered twice.")
            self.handlers[name] = fn

    def middleware(self, middleware: BaseMiddleware) -> None:
        self.middlewares.append(middleware)

    def feed(self, config: ExperimentConfig, data: Dict[str, Any] | None = None) -> RunOutcome:
        handler = self.handlers.get(config.command)
        if handler is None:
            raise ConfigError(f"No handler registered for command '{config.command}'.")

        call = handler
        for middleware in reversed(self.middlewares):
            call = (lambda mw, nxt: (lambda cfg, d: mw(nxt, cfg, d)))(middleware, call)

        logging.info(f"Running '{config.command}' with seed {config.seed}.")
        return call(config, dict(data or {}))
