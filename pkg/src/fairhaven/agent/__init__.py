"""Local agent: profiles, manifest ledger, resumable uploads, downloads."""
