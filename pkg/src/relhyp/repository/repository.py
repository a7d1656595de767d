import logging
from pathlib import Path

import httpx
import yaml
from pydantic import ValidationError

from relhyp.domain.errors import ConfigParse, RelhypError
from relhyp.domain.group import GroupSpec

logger = logging.getLogger(__name__)


class GroupSpecRepository:
    def __init__(self, path: str | None = None):
        self.location = path

    @classmethod
    def _read_from_content(cls, content: str, location: str = "<string>") -> GroupSpec:
        """Read and validate a group spec from YAML content."""
        try:
            docs = [d for d in yaml.safe_load_all(content) if d is not None]
        except yaml.YAMLError as e:
            raise ConfigParse(f"{location}: invalid YAML: {e}") from e
        if not docs or not isinstance(docs[0], dict):
            raise ConfigParse(f"{location}: expected a mapping with a 'family' key")
        data = docs[0]
        try:
            spec = GroupSpec.model_validate(data)
        except (ValidationError, ValueError, RelhypError) as e:
            raise ConfigParse(f"{location}: {e}") from e
        logger.debug("loaded %s group spec from %s", spec.family, location)
        return spec

    def _fetch(self) -> str:
        if self.location is None:
            raise ConfigParse("a group spec path or URL must be provided")
        if self.location.startswith("https://"):
            # Fetch remote spec via HTTP GET
            try:
                response = httpx.get(self.location)
                response.raise_for_status()
            except httpx.HTTPError as e:
                raise ConfigParse(f"{self.location}: fetch failed: {e}") from e
            return response.text
        try:
            with open(self.location, encoding="utf-8") as f:
                return f.read()
        except OSError as e:
            raise ConfigParse(f"{self.location}: {e}") from e

    def read(self, content: str | None = None) -> GroupSpec:
        if content is not None:
            return self._read_from_content(content)
        return self._read_from_content(self._fetch(), self.location or "<string>")


class GroupSpecFinder:
    def __init__(self, root_dir: str):
        self.root_dir = Path(root_dir)

    def find(self) -> str | None:
        # Check for all possible spec file name variations
        candidates = [
            "group.yaml",
            "group.yml",
            "Group.yaml",
            "Group.yml",
        ]
        for candidate in candidates:
            spec_path = self.root_dir / candidate
            if spec_path.exists():
                return str(spec_path)
        return None
