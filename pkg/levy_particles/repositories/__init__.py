from levy_particles.repositories.artifacts import ArtifactRepository, utc_timestamp

__all__ = ["ArtifactRepository", "utc_timestamp"]
