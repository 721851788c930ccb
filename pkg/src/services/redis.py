import logging

import redis
from src.config import get_settings

logger = logging.getLogger(__name__)


# =============================================================================
# Redis Key Constants
# =============================================================================

class RedisKeys:
    """Centralized Redis key definitions."""
    RUN_PREFIX = "qem:run"

    @staticmethod
    def run(fingerprint: str, J: float, B: float, M: int) -> str:
        return f"{RedisKeys.RUN_PREFIX}:{fingerprint}:{float(J)!r}:{float(B)!r}:{int(M)}"


class RedisClient:
    def __init__(self, url: str | None = None):
        url = url or get_settings().redis_url
        self.client = redis.Redis.from_url(url, decode_responses=True)

    def set(self, key: str, value: str, expire: int = None) -> bool:
        """Set a key-value pair in Redis."""
        return self.client.setex(key, expire, value) if expire else self.client.set(key, value)

    def get(self, key: str) -> str | None:
        """Get a value by key from Redis."""
        return self.client.get(key)

    def ping(self) -> bool:
        """Test Redis connection."""
        try:
            return self.client.ping()
        except redis.ConnectionError:
            return False


def get_redis_client() -> RedisClient:
    """Get a Redis client instance."""
    return RedisClient()


# =============================================================================
# Run Cache
# =============================================================================

class RunCache:
    """
    RunRecord cache keyed by config fingerprint and (J, B, M).

    Connection failures are logged and treated as misses so a sweep never
    depends on redis being up.
    """

    def __init__(self, client: RedisClient, expire: int | None = None):
        self.client = client
        self.expire = expire

    def get(self, config, J: float, B: float, M: int):
        from src.services.harness import RunRecord

        try:
            data = self.client.get(RedisKeys.run(config.fingerprint(), J, B, M))
        except redis.RedisError as e:
            logger.warning("Run cache read failed: %s", e)
            return None
        return RunRecord.model_validate_json(data) if data else None

    def put(self, config, record) -> None:
        key = RedisKeys.run(config.fingerprint(), record.J, record.B, record.M)
        try:
            self.client.set(key, record.model_dump_json(), expire=self.expire)
        except redis.RedisError as e:
            logger.warning("Run cache write failed: %s", e)


def get_run_cache() -> RunCache | None:
    """Run cache backed by Settings.redis_url, or None when no redis is configured."""
    if not get_settings().redis_url:
        return None
    return RunCache(get_redis_client())
