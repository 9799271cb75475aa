from engine.base import ConsensusEngine
from engine.centralized import CentralizedEngine
from engine.decentralized import DecentralizedEngine
from models.errors import ParameterError


class EngineFactory:
    _registry = {}

    @classmethod
    def register(cls, mode: str, engine_class):
        if not issubclass(engine_class, ConsensusEngine):
            raise ParameterError(f"{engine_class} must inherit from ConsensusEngine")
        cls._registry[mode] = engine_class

    @classmethod
    def create(cls, mode: str, *args, **kwargs) -> ConsensusEngine:
        engine_class = cls._registry.get(str(mode))
        if not engine_class:
            raise ParameterError(f"No engine registered for mode: {mode}")
        return engine_class(*args, **kwargs)


EngineFactory.register("centralized", CentralizedEngine)
EngineFactory.register("decentralized", DecentralizedEngine)
