import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Project Structure
BASE_DIR = Path(__file__).parent
PROMPTS_DIR = BASE_DIR / 'prompts'

# Run artifacts and experiment store
RUNS_DIR = Path(os.getenv('HOIKIT_RUNS_DIR', 'runs'))
RUNS_DB_URL = os.getenv('HOIKIT_RUNS_DB_URL', f"sqlite:///{RUNS_DIR / 'hoikit_runs.db'}")

# Scorer cache (SQLite file inside this directory)
HOIKIT_CACHE_DIR = Path(os.getenv('HOIKIT_CACHE_DIR', Path.home() / '.cache' / 'hoikit'))

# Remote ITM service
ITM_ENDPOINT = os.getenv('ITM_ENDPOINT', 'http://localhost:8000')
ITM_TIMEOUT = float(os.getenv('ITM_TIMEOUT', '30'))  # seconds
ITM_RETRIES = int(os.getenv('ITM_RETRIES', '3'))
ITM_BATCH_SIZE = int(os.getenv('ITM_BATCH_SIZE', '32'))  # sentences per request
ITM_MAX_WORKERS = int(os.getenv('ITM_MAX_WORKERS', '4'))

# SSH Tunnel for Remote ITM server (optional - for accessing remote GPU hosts)
SSH_TUNNEL_ENABLED = os.getenv('SSH_TUNNEL_ENABLED', 'false').lower() == 'true'
SSH_HOST = os.getenv('SSH_HOST', 'localhost')
SSH_REMOTE_PORT = int(os.getenv('SSH_REMOTE_PORT', '8000'))
SSH_LOCAL_PORT = int(os.getenv('SSH_LOCAL_PORT', '8000'))
SSH_USERNAME = os.getenv('SSH_USERNAME')  # Optional if using SSH config
SSH_KEY_PATH = os.getenv('SSH_KEY_PATH')  # Optional if using SSH config

