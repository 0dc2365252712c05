"""
Progress display for training runs and sweeps.
"""

import sys
import threading

import colorama
from colorama import Fore, Style

colorama.init()


class TrainingProgress:
    """Progress tracking for epochs and sweep rows, written to stderr."""

    def __init__(self, total_steps=100, description="Training", enabled=True, stream=None):
        self.total_steps = max(1, total_steps)
        self.current_step = 0
        self.description = description
        self.enabled = enabled
        self.stream = stream or sys.stderr
        self.lock = threading.Lock()

    def _emit(self, color, text):
        if self.enabled:
            print(f"{color}{text}{Style.RESET_ALL}", file=self.stream)

    def start(self):
        """Start the progress display."""
        self._emit(Fore.CYAN, f"{self.description} started...")

    def update(self, steps=1, detail=None):
        """Advance the counter and print the percentage with an optional detail."""
        with self.lock:
            self.current_step += steps
            percentage = int((self.current_step / self.total_steps) * 100)
            color = Fore.GREEN if percentage >= 100 else Fore.YELLOW
            suffix = f" ({detail})" if detail else ""
            self._emit(color, f"{self.description}: {percentage}% complete{suffix}")

    def finish(self):
        """Complete the progress display."""
        self._emit(Fore.GREEN, f"{self.description} completed!")
