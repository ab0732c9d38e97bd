from app.repositories.records import record_repo

__all__ = ["record_repo"]
