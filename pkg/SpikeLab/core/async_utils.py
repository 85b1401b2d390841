import asyncio
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from functools import wraps
from typing import Awaitable, Callable, Iterable, ParamSpec, TypeVar

from ..config import MAX_WORKERS

logger = logging.getLogger(__name__)

P = ParamSpec("P")
T = TypeVar("T")

THREAD_PREFIX = "spikelab-stage"

_executor = ThreadPoolExecutor(max_workers=MAX_WORKERS, thread_name_prefix=THREAD_PREFIX)


def _run_in_stage(stage: str, func: Callable[..., T], args, kwargs) -> T:
    # worker threads carry the stage name while busy
    thread = threading.current_thread()
    base = thread.name
    thread.name = f"{base}:{stage}"
    try:
        return func(*args, **kwargs)
    finally:
        thread.name = base


def aioify(func: Callable[P, T], stage: str = "point") -> Callable[P, Awaitable[T]]:
    if asyncio.iscoroutinefunction(func):
        raise TypeError("Cannot aioify a coroutine function.")

    @wraps(func)
    async def wrapper(*args: P.args, **kwargs: P.kwargs) -> T:
        loop = asyncio.get_running_loop()
        return await loop.run_in_executor(_executor, _run_in_stage, stage, func, args, kwargs)

    return wrapper


async def gather_points(func: Callable[..., T], points: Iterable[dict], stage: str) -> list[T]:
    """Evaluate func(**point) for every sweep point on the worker pool; results keep input order."""
    points = list(points)
    runner = aioify(func, stage)
    logger.info(f"Stage {stage}: {len(points)} points on up to {MAX_WORKERS} workers")
    start = time.perf_counter()
    try:
        results = list(await asyncio.gather(*(runner(**point) for point in points)))
    except Exception as e:
        logger.error(f"Stage {stage} failed after {time.perf_counter() - start:.1f}s: {e}")
        raise
    logger.info(f"Stage {stage} finished in {time.perf_counter() - start:.1f}s")
    return results
