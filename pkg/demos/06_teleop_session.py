"""A scripted operator session against a live server.

Starts the teleoperation service with its built-in plant, connects a
newline-JSON client, walks the whole stage machine (configure, lock,
target, move) and waits for the convergence ack.

Run:  python3 demos/06_teleop_session.py
"""

import asyncio
import json

from softteleop import AppConfig, NoiseModel
from softteleop.server import TeleopServer


async def main():
    config = AppConfig(noise=NoiseModel.silent())
    config.control.period_ms = 50.0
    server = TeleopServer(config)
    await server.start(port=0, ws_port=None)
    print(f"server up on tcp 127.0.0.1:{server.tcp_port}")

    reader, writer = await asyncio.open_connection("127.0.0.1", server.tcp_port)

    async def send(obj):
        writer.write((json.dumps(obj) + "\n").encode())
        await writer.drain()
        print(">>", obj)

    async def wait_for(cond, limit=400):
        for _ in range(limit):
            msg = json.loads(await reader.readline())
            if msg["type"] != "state":
                print("<<", msg)
            if cond(msg):
                return msg
        raise RuntimeError("gave up waiting")

    await send({"type": "hello", "version": 1})
    welcome = await wait_for(lambda m: m["type"] == "welcome")

    await send({"type": "config", "robot_spec": welcome["robot_spec"]})
    await wait_for(lambda m: m == {"type": "ack", "ref": "config"})

    await send({"type": "lock"})
    await wait_for(lambda m: m == {"type": "ack", "ref": "lock"})

    await send({"type": "target", "module": 1, "pos_mm": [8.0, 0.0, 85.0]})
    await wait_for(lambda m: m == {"type": "ack", "ref": "target"})

    await send({"type": "move"})
    await wait_for(lambda m: m == {"type": "ack", "ref": "move"})
    print("... robot moving ...")
    await wait_for(lambda m: m == {"type": "ack", "ref": "converged"})

    state = await wait_for(lambda m: m["type"] == "state")
    print(f"back in stage {state['fsm']}, end effector at {state['ee_mm']}")

    writer.close()
    await server.stop()


if __name__ == "__main__":
    asyncio.run(main())
