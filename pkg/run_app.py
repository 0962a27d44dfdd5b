#!/usr/bin/env python
"""Serve the canned-reply model server (backend.main) for pipeline runs against HTTP backends."""
import argparse
import os
import sys

import uvicorn
from loguru import logger

# Set up paths properly
current_dir = os.path.dirname(os.path.abspath(__file__))
if current_dir not in sys.path:
    sys.path.insert(0, current_dir)


def main():
    parser = argparse.ArgumentParser(description="Run the stub model server")
    parser.add_argument("--host", default=os.getenv("POEM_STUB_HOST", "127.0.0.1"))
    parser.add_argument("--port", type=int, default=int(os.getenv("POEM_STUB_PORT", "8000")))
    parser.add_argument("--log-level", default=os.getenv("POEM_LOG_LEVEL", "info").lower())
    args = parser.parse_args()

    logger.info(f"Starting stub model server on http://{args.host}:{args.port}")
    try:
        uvicorn.run("backend.main:app", host=args.host, port=args.port, log_level=args.log_level)
    except Exception as e:
        logger.error(f"Error starting stub server: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
