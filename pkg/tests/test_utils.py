#!/usr/bin/env python3
"""
Tests for the utils module.
"""

import os
import tempfile
import threading
import time
from pathlib import Path

import pytest

from fivcmmcan.utils import (
    DefaultKwargs,
    LazyValue,
    OutputDir,
    Runnable,
    gather_runnables,
)


class _Sleeper(Runnable):
    def __init__(self, index: int, delay: float = 0.0, fail: bool = False):
        self.index = index
        self.delay = delay
        self.fail = fail
        self.thread = None

    @property
    def id(self) -> str:
        return f"sleeper-{self.index}"

    @property
    def name(self) -> str:
        return f"Sleeper {self.index}"

    def run(self, **kwargs):
        self.thread = threading.get_ident()
        time.sleep(self.delay)
        if self.fail:
            raise RuntimeError(f"sleeper {self.index} failed")
        return self.index


class TestLazyValue:
    """Test the LazyValue class."""

    def test_lazy_evaluation(self):
        """Test that value is computed lazily and cached."""
        call_count = 0

        def getter():
            nonlocal call_count
            call_count += 1
            return "computed_value"

        lazy = LazyValue(getter)
        assert call_count == 0

        assert lazy() == "computed_value"
        assert lazy() == "computed_value"
        assert call_count == 1

    def test_call_forwarded(self):
        """Test calling with arguments forwards to a callable value."""
        lazy = LazyValue(lambda: lambda x, y: x + y)
        assert lazy(5, 10) == 15

    def test_call_with_non_callable_value(self):
        """Test calling with args when the value is not callable."""
        lazy = LazyValue(lambda: "not_callable")
        with pytest.raises(TypeError, match="Underlying value is not callable"):
            lazy("arg")

    def test_attributes(self):
        """Test attribute access and assignment delegate to the value."""

        class Registry:
            def __init__(self):
                self.name = "initial"

        lazy = LazyValue(Registry)
        assert lazy.name == "initial"
        lazy.name = "modified"
        assert lazy.name == "modified"

    def test_container_protocol(self):
        """Test item access, iteration, len, in and bool."""
        lazy = LazyValue(lambda: {"oracle": 1, "bilinear": 2})
        assert lazy["oracle"] == 1
        assert sorted(lazy) == ["bilinear", "oracle"]
        assert len(lazy) == 2
        assert "bilinear" in lazy
        assert "clip" not in lazy
        assert bool(lazy)
        assert not LazyValue(lambda: [])

    def test_repr(self):
        """Test repr before and after evaluation."""
        lazy = LazyValue(lambda: "value")
        assert repr(lazy) == "LazyValue(<uninitialized>)"
        lazy()
        assert repr(lazy) == "LazyValue('value')"


class TestDefaultKwargs:
    """Test keyword defaults."""

    def test_fills_missing_and_none(self):
        """Test gaps and None values take the default."""
        defaults = DefaultKwargs({"epochs": 20, "lr": 0.01, "d": 32})
        merged = defaults({"lr": 0.1, "d": None})
        assert merged == {"epochs": 20, "lr": 0.1, "d": 32}

    def test_argument_untouched(self):
        """Test the given dict is not modified."""
        options = {"lr": 0.1}
        DefaultKwargs({"epochs": 20})(options)
        assert options == {"lr": 0.1}

    def test_no_argument(self):
        """Test calling without options gives the defaults."""
        assert DefaultKwargs({"seed": 0})() == {"seed": 0}


class TestOutputDir:
    """Test the OutputDir class."""

    def test_init_custom_path(self):
        """Test a custom path is created and resolved."""
        with tempfile.TemporaryDirectory() as tmpdir:
            custom_path = os.path.join(tmpdir, "custom")
            output_dir = OutputDir(custom_path)

            assert str(output_dir) == str(Path(custom_path).resolve())
            assert output_dir.base.exists()

    def test_join(self):
        """Test the / operator gives a path inside the directory."""
        with tempfile.TemporaryDirectory() as tmpdir:
            output_dir = OutputDir(tmpdir)
            assert output_dir / "sweep.csv" == Path(tmpdir).resolve() / "sweep.csv"

    def test_context_manager(self):
        """Test OutputDir as context manager."""
        original_cwd = os.getcwd()
        with tempfile.TemporaryDirectory() as tmpdir:
            output_dir = OutputDir(tmpdir)
            with output_dir:
                assert os.getcwd() == str(output_dir)
            assert os.getcwd() == original_cwd

    def test_subdir(self):
        """Test creating nested subdirectories."""
        with tempfile.TemporaryDirectory() as tmpdir:
            subdir = OutputDir(tmpdir).subdir("lambda_0.01", "full")
            assert isinstance(subdir, OutputDir)
            assert subdir.base == Path(tmpdir).resolve() / "lambda_0.01" / "full"
            assert subdir.base.exists()

    def test_cleanup(self):
        """Test cleanup removes the directory."""
        with tempfile.TemporaryDirectory() as tmpdir:
            output_dir = OutputDir(os.path.join(tmpdir, "to_cleanup"))
            assert output_dir.base.exists()
            output_dir.cleanup()
            assert not output_dir.base.exists()


class TestGatherRunnables:
    """Test bounded-parallel execution of runnables."""

    def test_sequential_in_caller_thread(self):
        """Test one worker runs everything in order in the calling thread."""
        runnables = [_Sleeper(i) for i in range(3)]
        assert gather_runnables(runnables) == [0, 1, 2]
        assert all(r.thread == threading.get_ident() for r in runnables)

    def test_parallel_keeps_order(self):
        """Test results follow input order whatever finishes first."""
        runnables = [_Sleeper(0, 0.05), _Sleeper(1, 0.0), _Sleeper(2, 0.02)]
        assert gather_runnables(runnables, workers=3) == [0, 1, 2]

    def test_failure_propagates(self):
        """Test a failing runnable raises its error."""
        with pytest.raises(RuntimeError, match="sleeper 1 failed"):
            gather_runnables([_Sleeper(0), _Sleeper(1, fail=True)], workers=2)

    def test_call(self):
        """Test calling a runnable runs it."""
        assert _Sleeper(4)() == 4
