from pathlib import Path
from unittest.mock import MagicMock, patch

import httpx
import pytest

from relhyp.domain.errors import ConfigParse
from relhyp.domain.group import CyclicFactor, GroupSpec
from relhyp.repository.repository import GroupSpecFinder, GroupSpecRepository


class TestGroupSpecRepository:
    """Test cases for the GroupSpecRepository class."""

    def test_init_with_path(self, tmp_path):
        """Test GroupSpecRepository initialization with a path."""
        spec_path = tmp_path / "group.yaml"
        spec_path.touch()

        repo = GroupSpecRepository(path=str(spec_path))
        assert repo.location == str(spec_path)

    def test_read_free_product(self, tmp_path):
        """Test reading a free product with two peripherals."""
        spec_path = tmp_path / "group.yaml"
        spec_content = """
family: free_product
name: Z*Z
factors:
  - kind: free_abelian
    generators: [a]
  - kind: free_abelian
    generators: [b]
peripherals:
  - factor: 0
  - factor: 1
"""
        spec_path.write_text(spec_content)

        repo = GroupSpecRepository(path=str(spec_path))
        spec = repo.read()

        assert isinstance(spec, GroupSpec)
        assert spec.name == "Z*Z"
        assert len(spec.peripherals) == 2
        assert [str(x) for x in spec.x_letters] == ["a", "a^-1", "b", "b^-1"]

    def test_read_one_relator(self, tmp_path):
        """Test reading a one-relator quotient with cyclic factors."""
        spec_path = tmp_path / "group.yaml"
        spec_content = """
family: one_relator
factors:
  - kind: cyclic
    generator: a
    order: 2
  - kind: cyclic
    generator: b
    order: 3
peripherals:
  - factor: 0
  - factor: 1
relator: (a b)^7
"""
        spec_path.write_text(spec_content)

        spec = GroupSpecRepository(path=str(spec_path)).read()

        assert isinstance(spec.factors[1], CyclicFactor)
        assert spec.is_identity("(a b)^7")

    def test_read_from_content(self):
        """Test reading a spec passed as a string."""
        spec = GroupSpecRepository().read(content="family: free\nfactors:\n  - kind: free\n    generators: [x, y]\n")

        assert spec.family == "free"
        assert spec.factors[0].generators == ["x", "y"]

    def test_read_bundled_specs(self, specs_dir):
        """Test that every bundled example spec loads."""
        paths = sorted(specs_dir.glob("*.yaml"))

        specs = [GroupSpecRepository(path=str(p)).read() for p in paths]

        assert len(specs) == 4
        assert {s.family for s in specs} == {"free", "free_abelian", "free_product", "one_relator"}

    def test_read_invalid_yaml(self, tmp_path):
        """Test that broken YAML is a configuration error."""
        spec_path = tmp_path / "group.yaml"
        spec_path.write_text("family: [free\n")

        with pytest.raises(ConfigParse):
            GroupSpecRepository(path=str(spec_path)).read()

    def test_read_invalid_spec(self, tmp_path):
        """Test that a schema violation is a configuration error naming the file."""
        spec_path = tmp_path / "group.yaml"
        spec_path.write_text("family: free\nfactors:\n  - kind: free\n    generators: [a]\nperipherals:\n  - factor: 0\n")

        with pytest.raises(ConfigParse) as excinfo:
            GroupSpecRepository(path=str(spec_path)).read()
        assert str(spec_path) in str(excinfo.value)

    def test_read_unknown_relator_generator(self, tmp_path):
        """Test that a relator over unknown generators is a configuration error."""
        spec_path = tmp_path / "group.yaml"
        spec_path.write_text(
            "family: one_relator\nfactors:\n  - kind: cyclic\n    generator: a\n    order: 2\nrelator: a z\n"
        )

        with pytest.raises(ConfigParse):
            GroupSpecRepository(path=str(spec_path)).read()

    def test_read_empty_file(self, tmp_path):
        """Test that an empty file is a configuration error."""
        spec_path = tmp_path / "group.yaml"
        spec_path.write_text("")

        with pytest.raises(ConfigParse):
            GroupSpecRepository(path=str(spec_path)).read()

    def test_read_missing_file(self, tmp_path):
        """Test that a missing file is a configuration error."""
        with pytest.raises(ConfigParse):
            GroupSpecRepository(path=str(tmp_path / "missing.yaml")).read()

    def test_read_without_location(self):
        """Test that reading needs a location or content."""
        with pytest.raises(ConfigParse):
            GroupSpecRepository().read()

    def test_read_remote_spec(self):
        """Test that https:// specs are fetched with httpx."""
        remote_content = """
family: free_abelian
factors:
  - kind: free_abelian
    generators: [a, b]
peripherals:
  - factor: 0
    coordinates: [0]
"""

        # Mock httpx.get to return the remote content
        with patch("relhyp.repository.repository.httpx.get") as mock_get:
            mock_response = MagicMock()
            mock_response.text = remote_content
            mock_response.raise_for_status = MagicMock()
            mock_get.return_value = mock_response

            spec = GroupSpecRepository(path="https://example.com/group.yaml").read()

            mock_get.assert_called_once_with("https://example.com/group.yaml")
            assert spec.family == "free_abelian"
            assert spec.peripherals[0].coordinates == [0]

    def test_read_remote_spec_failure(self):
        """Test that HTTP failures become configuration errors."""
        with patch("relhyp.repository.repository.httpx.get") as mock_get:
            mock_get.side_effect = httpx.ConnectError("unreachable")

            with pytest.raises(ConfigParse):
                GroupSpecRepository(path="https://example.com/group.yaml").read()


class TestGroupSpecFinder:
    """Test cases for the GroupSpecFinder class."""

    def test_init(self, tmp_path):
        """Test GroupSpecFinder initialization."""
        finder = GroupSpecFinder(root_dir=str(tmp_path))
        assert finder.root_dir == tmp_path

    def test_find_group_yaml(self, tmp_path):
        """Test finding a group.yaml file."""
        (tmp_path / "group.yaml").touch()

        found = GroupSpecFinder(root_dir=str(tmp_path)).find()

        assert found is not None
        assert Path(found).name == "group.yaml"

    def test_find_group_yml(self, tmp_path):
        """Test finding a group.yml file."""
        (tmp_path / "group.yml").touch()

        found = GroupSpecFinder(root_dir=str(tmp_path)).find()

        assert found is not None
        assert Path(found).name == "group.yml"

    def test_find_priority_order(self, tmp_path):
        """Test that group.yaml wins over group.yml."""
        (tmp_path / "group.yml").touch()
        (tmp_path / "group.yaml").touch()

        found = GroupSpecFinder(root_dir=str(tmp_path)).find()

        assert Path(found).name == "group.yaml"

    def test_find_nothing(self, tmp_path):
        """Test finding when no spec exists."""
        assert GroupSpecFinder(root_dir=str(tmp_path)).find() is None

    def test_find_ignores_subdirectories(self, tmp_path):
        """Test that find only looks in the given directory."""
        sub_dir = tmp_path / "subdir"
        sub_dir.mkdir()
        (sub_dir / "group.yaml").touch()

        assert GroupSpecFinder(root_dir=str(tmp_path)).find() is None
