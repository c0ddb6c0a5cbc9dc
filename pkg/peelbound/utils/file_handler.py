"""
File handling utilities for uploaded instance files (CSV)
"""

from fastapi import HTTPException, status


ALLOWED_EXTENSIONS = ("csv", "txt")
MAX_UPLOAD_BYTES = 16 * 1024 * 1024


def extract_text_from_upload(file_content: bytes, filename: str) -> str:
    """
    Decode an uploaded instance file

    UTF-8 (with or without BOM) is tried first; anything else is read as Latin-1,
    which accepts every byte sequence. Line endings are normalized to "\\n".

    Args:
        file_content: Raw bytes of the uploaded file
        filename: Name of the file (used to determine type)

    Returns:
        Decoded text content

    Raises:
        HTTPException: Unsupported extension, empty or oversized file
    """
    file_extension = filename.lower().rsplit(".", 1)[-1] if filename and "." in filename else ""
    if file_extension not in ALLOWED_EXTENSIONS:
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail=f"Unsupported file format: .{file_extension}. Supported formats: .csv, .txt"
        )
    if not file_content.strip():
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail="Uploaded file is empty")
    if len(file_content) > MAX_UPLOAD_BYTES:
        raise HTTPException(
            status_code=status.HTTP_413_REQUEST_ENTITY_TOO_LARGE,
            detail=f"Instance files are limited to {MAX_UPLOAD_BYTES // (1024 * 1024)} MiB"
        )

    try:
        text = file_content.decode("utf-8-sig")
    except UnicodeDecodeError:
        text = file_content.decode("latin-1")
    return text.replace("\r\n", "\n").replace("\r", "\n")
