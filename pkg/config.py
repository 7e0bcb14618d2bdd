"""Shared SQLAlchemy handle for the experiment run registry."""

from flask_sqlalchemy import SQLAlchemy

db = SQLAlchemy()
