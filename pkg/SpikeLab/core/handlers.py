from .exceptions import ConfigError

SCENARIO_KINDS = {}
BUILTIN_SCENARIOS = {}


def scenario_kind(name: str | list[str]):
    """Register a pipeline function under one or more scenario kinds."""
    def decorator(func):
        if isinstance(name, list):
            for n in name:
                SCENARIO_KINDS[n.lower()] = func
        else:
            SCENARIO_KINDS[name.lower()] = func
        return func
    return decorator


def builtin_scenario(name: str):
    """Register a factory returning the default Scenario for a named reproduction."""
    def decorator(func):
        BUILTIN_SCENARIOS[name] = func
        return func
    return decorator


def get_pipeline(kind: str):
    pipeline = SCENARIO_KINDS.get(kind.lower())
    if pipeline is None:
        raise ConfigError(f"Unknown scenario kind '{kind}'. Known kinds: {sorted(SCENARIO_KINDS)}")
    return pipeline
