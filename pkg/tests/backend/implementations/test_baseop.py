import pytest

from tchakaloff.backend.commands import Command, load_op
from tchakaloff.backend.implementations.baseop import BaseOp, OpResult
from tchakaloff.cli import RunConfig


class ConcreteOp(BaseOp):
    def run(self, source):
        return OpResult(report={"source": source}, summary=source)

    @property
    def name(self):
        return "test"


class TestBaseOpImplementation:
    """Test suite for BaseOp base class implementation"""

    def test_sources_are_the_inputs(self):
        op = ConcreteOp(RunConfig("compress", inputs=["a.csv", "b.csv"]))
        assert op.sources() == ["a.csv", "b.csv"]
        assert op.name == "test"

    def test_sources_need_an_input(self):
        with pytest.raises(ValueError, match="test needs at least one --input file"):
            ConcreteOp(RunConfig("compress")).sources()

    def test_cleanup_is_a_noop(self):
        assert ConcreteOp(RunConfig("compress")).cleanup() is None

    def test_abstract_methods_required(self):
        class Incomplete(BaseOp):
            pass

        with pytest.raises(TypeError):
            Incomplete(RunConfig("compress"))

    @pytest.mark.parametrize(
        "path,stem", [("data/atoms.csv", "atoms"), ("m.json", "m"), ("noext", "noext")]
    )
    def test_stem(self, path, stem):
        assert BaseOp.stem(path) == stem

    def test_read_measure_file_by_extension(self, write_text):
        csv_path = write_text("mu.csv", "x1,w\n1,0.5\n2,0.5\n")
        json_path = write_text("mu.json", '{"nodes": [[1], [2]], "weights": [0.5, 0.5]}')
        for path in (csv_path, json_path):
            mu = BaseOp.read_measure_file(path)
            assert mu.size == 2 and mu.mass == 1.0

    def test_op_result_defaults(self):
        result = OpResult(report={}, summary="")
        assert result.exit_code == 0
        assert result.rule is None and result.moments is None


class TestLoadOp:
    """Command names map to op classes imported on first use"""

    @pytest.mark.parametrize(
        "command,class_name",
        [
            ("compress", "CompressOp"),
            ("moments", "MomentsOp"),
            ("represent-grid", "GridOp"),
            ("mm", "MomentMatrixOp"),
            ("roots", "RootsOp"),
            ("selftest", "SelfTestOp"),
        ],
    )
    def test_load_by_name(self, command, class_name):
        cls = load_op(command)
        assert cls.__name__ == class_name
        assert issubclass(cls, BaseOp)
        assert cls(RunConfig(command)).name == command

    def test_load_by_enum(self):
        assert load_op(Command.ROOTS).__name__ == "RootsOp"

    def test_unknown_command(self):
        with pytest.raises(ValueError):
            load_op("transmogrify")
