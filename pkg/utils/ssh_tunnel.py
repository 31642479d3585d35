from contextlib import contextmanager
from typing import Optional

from sshtunnel import SSHTunnelForwarder

from config import SSH_HOST, SSH_REMOTE_PORT, SSH_LOCAL_PORT, SSH_USERNAME, SSH_KEY_PATH


def forwarder_kwargs(host: str = SSH_HOST, remote_port: int = SSH_REMOTE_PORT, local_port: int = SSH_LOCAL_PORT,
                     username: Optional[str] = SSH_USERNAME, key_path: Optional[str] = SSH_KEY_PATH) -> dict:
    """SSHTunnelForwarder arguments; auth keys only when set (otherwise ~/.ssh/config applies)"""
    kwargs = {
        'ssh_address_or_host': (host, 22),
        'remote_bind_address': ('localhost', remote_port),
        'local_bind_address': ('localhost', local_port),
    }
    if username:
        kwargs['ssh_username'] = username
    if key_path:
        kwargs['ssh_pkey'] = key_path
    return kwargs


@contextmanager
def ssh_tunnel(**overrides):
    """
    Forward a local port to the ITM service on a GPU host and yield the local endpoint.

    Usage:
        with ssh_tunnel() as endpoint:
            scores = ITMClient(endpoint, use_tunnel=False).score(image_bytes, texts)

    .env:
        SSH_TUNNEL_ENABLED=true
        SSH_HOST=gpu-box
        SSH_REMOTE_PORT=8000   # port the ITM service listens on, remote side
        SSH_LOCAL_PORT=8000
    """
    kwargs = forwarder_kwargs(**overrides)
    host, _ = kwargs['ssh_address_or_host']
    tunnel = SSHTunnelForwarder(**kwargs)
    tunnel.start()
    try:
        endpoint = f'http://localhost:{tunnel.local_bind_port}'
        print(f"[SSH TUNNEL] {endpoint} -> {host}:{kwargs['remote_bind_address'][1]}")
        yield endpoint
    finally:
        tunnel.stop()
        print("[SSH TUNNEL] Closed")
