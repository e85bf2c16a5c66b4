import logging
from typing import Callable, Iterable, Sequence, TypeVar

from joblib import Parallel, delayed

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """
    Applies `fn` to every item and returns the results in submission order.

    With threads <= 1 the loop runs inline. Reductions over the returned list
    must be done sequentially by the caller so results do not depend on the
    thread count.
    """
    items: Sequence[T] = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    logging.debug(f"Dispatching {len(items)} tasks over {threads} threads.")
    return Parallel(n_jobs=threads, prefer="threads")(delayed(fn)(item) for item in items)
