import importlib
import pkgutil
from typing import Dict, List, Type

from .base_backend import KktBackend
from ..utils.logger import logger


class KktBackendManager:
    """
    Descubre las factorizaciones KKT disponibles y entrega instancias nuevas.

    Busca en el paquete `solvers` los módulos terminados en `_backend` y registra
    las clases que heredan de `KktBackend`, de modo que añadir una factorización
    no requiere tocar el resolvedor.
    """

    def __init__(self):
        self.backends: Dict[str, Type[KktBackend]] = {}
        self._discover_backends()

    def _discover_backends(self):
        package = importlib.import_module(__package__)
        logger.debug("Descubriendo backends de factorización KKT...")
        for _, name, _ in pkgutil.iter_modules(package.__path__):
            if not name.endswith("_backend") or name == "base_backend":
                continue
            try:
                module = importlib.import_module(f".{name}", package=__package__)
                for attribute_name in dir(module):
                    attribute = getattr(module, attribute_name)
                    if isinstance(attribute, type) and issubclass(attribute, KktBackend) and attribute is not KktBackend:
                        backend_name = attribute().get_backend_name()
                        self.backends[backend_name] = attribute
                        logger.debug(f"  - Backend encontrado: '{backend_name}'")
            except Exception as e:
                logger.error(f"Error al cargar el backend desde {name}: {e}")

    def get_available_backends(self) -> List[str]:
        return sorted(self.backends.keys())

    def get_backend(self, size: int, preference: str = "auto", dense_threshold: int = 512) -> KktBackend:
        """Instancia nueva; en modo 'auto' elige la densa cuando size = n+m ≤ dense_threshold."""
        if preference == "auto":
            preference = "dense_lu" if size <= dense_threshold else "sparse_lu"
        if preference not in self.backends:
            raise KeyError(f"Backend KKT '{preference}' no disponible; opciones: {self.get_available_backends()}.")
        return self.backends[preference]()


_default_manager = None


def default_manager() -> KktBackendManager:
    global _default_manager
    if _default_manager is None:
        _default_manager = KktBackendManager()
    return _default_manager
