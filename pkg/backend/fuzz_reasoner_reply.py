"""
Coverage-guided fuzzing of the model reply parsers.

    pip install atheris
    python -m backend.fuzz_reasoner_reply -max_total_time=60

Any exception other than a ReplyParseError is a crash.
"""
import sys

import atheris

with atheris.instrument_imports():
    from backend.exceptions import ReplyParseError
    from backend.llmproto import parse_grounding_reply, parse_reasoner_reply


def TestOneInput(data: bytes):
    try:
        reply = parse_reasoner_reply(data)
    except ReplyParseError:
        pass
    else:
        if reply.target_id < 0 or not reply.transform.is_finite():
            raise RuntimeError(f"parser accepted an invalid reply: {reply!r}")

    try:
        parse_grounding_reply(data)
    except ReplyParseError:
        pass


def main():
    atheris.Setup(sys.argv, TestOneInput)
    atheris.Fuzz()


if __name__ == "__main__":
    main()
