"""
Persistent result cache (sqlite)
"""
import hashlib
import json
import logging
import os
import sqlite3
from typing import Dict, Iterable, List, Optional

from errors import CacheError
from solver_config import CACHE_CONFIG, SOLVER_VERSION

logger = logging.getLogger(__name__)


def file_digest(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def cache_key(config: Dict, input_files: Iterable[str] = ()) -> str:
    """SHA-256 of the canonical config JSON, the digests of every input file and the solver version"""
    payload = {
        'config': config,
        'inputs': sorted(file_digest(path) for path in input_files),
        'version': SOLVER_VERSION,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode('utf-8')).hexdigest()


class ResultCache:
    def __init__(self, directory: str = CACHE_CONFIG['directory']):
        self.directory = directory
        self.db_path = os.path.join(directory, CACHE_CONFIG['database'])

    def get_connection(self):
        """Get database connection"""
        try:
            os.makedirs(self.directory, exist_ok=True)
            conn = sqlite3.connect(self.db_path)
        except (OSError, sqlite3.Error) as e:
            raise CacheError(f"cannot open result cache at {self.db_path}: {e}") from e
        conn.row_factory = sqlite3.Row
        return conn

    def init_db(self):
        """Initialize database tables"""
        conn = self.get_connection()
        cursor = conn.cursor()
        cursor.execute('''
            CREATE TABLE IF NOT EXISTS results (
                key TEXT PRIMARY KEY,
                version TEXT NOT NULL,
                command TEXT NOT NULL,
                rows TEXT NOT NULL,
                created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
            )
        ''')
        conn.commit()
        conn.close()

    def get(self, key: str) -> Optional[List[Dict]]:
        """Stored rows for key, or None on a miss, a version change or a corrupt entry"""
        conn = self.get_connection()
        try:
            row = conn.execute('SELECT version, rows FROM results WHERE key = ?', (key,)).fetchone()
        except sqlite3.DatabaseError as e:
            logger.warning(f"result cache unreadable ({e}); recomputing")
            return None
        finally:
            conn.close()

        if row is None:
            return None
        if row['version'] != SOLVER_VERSION:
            logger.info(f"cache entry {key[:12]} from solver {row['version']} ignored")
            return None
        try:
            rows = json.loads(row['rows'])
            if not isinstance(rows, list) or not all(isinstance(r, dict) for r in rows):
                raise ValueError("rows must be a list of objects")
        except ValueError as e:
            logger.warning(f"corrupt cache entry {key[:12]} ({e}); recomputing")
            return None
        return rows

    def put(self, key: str, command: str, rows: List[Dict]):
        conn = self.get_connection()
        try:
            conn.execute(
                'INSERT OR REPLACE INTO results (key, version, command, rows) VALUES (?, ?, ?, ?)',
                (key, SOLVER_VERSION, command, json.dumps(rows)))
            conn.commit()
        except sqlite3.DatabaseError as e:
            logger.warning(f"could not store cache entry {key[:12]}: {e}")
        finally:
            conn.close()

    def count(self) -> int:
        conn = self.get_connection()
        try:
            return conn.execute('SELECT COUNT(*) FROM results').fetchone()[0]
        finally:
            conn.close()
