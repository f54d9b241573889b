"""Launch the motion service on ephemeral ports for frontend tests.

Prints "PORT <tcp> <ws>" once the listeners are up, then runs until
stdin closes or a signal arrives.
"""

import asyncio
import sys

from softteleop.config import AppConfig
from softteleop.geometry import ModuleSpec
from softteleop.plant import NoiseModel
from softteleop.server import TeleopServer


async def main() -> None:
    config = AppConfig(noise=NoiseModel.silent())
    config.control.period_ms = 20.0
    # distinctive radius so tests can prove the form came from the wire
    config.modules = [ModuleSpec(radius_mm=17.5), ModuleSpec(radius_mm=17.5)]
    server = TeleopServer(config)
    await server.start(port=0, ws_port=0)
    print(f"PORT {server.tcp_port} {server.ws_port}", flush=True)

    loop = asyncio.get_event_loop()
    stdin_closed = loop.create_future()

    def on_stdin():
        data = sys.stdin.buffer.read(1)
        if not data and not stdin_closed.done():
            stdin_closed.set_result(None)

    loop.add_reader(sys.stdin.fileno(), on_stdin)
    await stdin_closed
    await server.stop()


if __name__ == "__main__":
    asyncio.run(main())
