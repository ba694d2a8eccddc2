#!/usr/bin/env python3

import asyncio
import copy
import csv
import functools
import io
import json
import logging.config
import os
import tempfile

from concurrent.futures import ThreadPoolExecutor

import numpy

import config


config.load()


def log_setup(name="ILALab"):

	logger = logging.getLogger(name)

	if not logger.hasHandlers():

		# Get the log configuration
		log_config = copy.deepcopy(config.ilalab_config.get("ILALab.log_config"))

		# File handlers need their directory to exist
		for handler in (log_config or {}).get("handlers", {}).values():
			if handler.get("filename"):
				os.makedirs(os.path.dirname(os.path.abspath(handler["filename"])), exist_ok=True)

		# Load log configuration
		logging.config.dictConfig(log_config)

	# Create logger
	return logger


log = log_setup()


async def run_process_async(command, input=None):
	"""
	A helper function for asyncio's subprocess.

	Args:
		command:  The command line level syntax that would be
			written in shell or a terminal window.  (str)
	Returns:
		Results in a dictionary.
	"""

	# Validate that command is not a string
	if not isinstance(command, str):
		raise TypeError('Command must be a str type')

	# Run the command
	process = await asyncio.create_subprocess_shell(
		command, stdin=asyncio.subprocess.PIPE, stdout=asyncio.subprocess.PIPE,
		stderr=asyncio.subprocess.PIPE)

	if input:
		(stdout, stderr) = await process.communicate(input=bytes(input, "utf-8"))

	else:
		(stdout, stderr) = await process.communicate()

	return {
		"stdout": (stdout.decode()).strip(),
		"stderr": (stderr.decode()).strip() if stderr != None else None,
		"status": process.returncode,
		"success": True if process.returncode == 0 else False
	}


async def git_describe():

	try:
		results = await run_process_async("git describe --always --dirty")

	except OSError:
		return "unknown"

	return results["stdout"] if results["success"] and results["stdout"] else "unknown"


def thread_map(function, items, threads=None):
	"""Apply `function` to every item on a bounded thread pool.

	Results come back in the order of `items`, whatever order the workers
	finish in.
	"""

	items = list(items)
	threads = min(threads or config.thread_cap(), max(1, len(items)))

	if threads == 1:
		return [ function(item) for item in items ]

	with ThreadPoolExecutor(max_workers=threads) as pool:
		return list(pool.map(function, items))


async def run_in_thread(function, *args, **kwargs):
	"""Await a blocking call on the default executor."""

	loop = asyncio.get_running_loop()

	return await loop.run_in_executor(None, functools.partial(function, *args, **kwargs))


async def gather_in_threads(function, items, threads=None):
	"""Async counterpart of `thread_map` for the harness coroutines."""

	items = list(items)
	loop = asyncio.get_running_loop()
	threads = min(threads or config.thread_cap(), max(1, len(items)))

	with ThreadPoolExecutor(max_workers=threads) as pool:
		return await asyncio.gather(
			*[ loop.run_in_executor(pool, function, item) for item in items ])


def write_bytes_atomic(path, payload: bytes):
	"""Write to a temporary file in the target directory, then rename over `path`."""

	directory = os.path.dirname(os.path.abspath(path))
	os.makedirs(directory, exist_ok=True)

	handle, temp_path = tempfile.mkstemp(dir=directory, prefix=".{}.".format(os.path.basename(path)))

	try:
		with os.fdopen(handle, "wb") as temp_file:
			temp_file.write(payload)
			temp_file.flush()
			os.fsync(temp_file.fileno())

		os.replace(temp_path, path)

	except BaseException:
		if os.path.exists(temp_path):
			os.remove(temp_path)
		raise


def write_csv_atomic(path, header, rows):

	buffer = io.StringIO()
	writer = csv.writer(buffer, lineterminator="\n")
	writer.writerow(header)

	for row in rows:
		writer.writerow([ format_cell(value) for value in row ])

	write_bytes_atomic(path, buffer.getvalue().encode("utf-8"))
	log.debug("Wrote {} rows to:  {}".format(len(rows), path))


def read_csv(path):

	with open(path, "r", encoding="utf8", newline="") as csv_file:
		return list(csv.DictReader(csv_file))


def write_json_atomic(path, contents):

	write_bytes_atomic(path, (json.dumps(contents, indent=2, sort_keys=True) + "\n").encode("utf-8"))


def format_cell(value):

	if isinstance(value, bool):
		return "true" if value else "false"

	if isinstance(value, (float, numpy.floating)):
		return repr(float(value))

	if isinstance(value, numpy.integer):
		return int(value)

	if value is None:
		return ""

	return value
