"""
Local persistence of run artifacts and tensor archives.
"""
