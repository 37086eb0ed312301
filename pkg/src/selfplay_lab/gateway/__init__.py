"""Chat-completion gateway: live HTTP and scripted offline backends."""
from selfplay_lab.gateway.base import ChatBackend, complete, validate_request
from selfplay_lab.gateway.retry import NO_MORE_RETRIES, RateLimiter, RetryPolicy, retry_schedule
from selfplay_lab.gateway.scripted import ScriptedBackend, load_script, scripted_backend
