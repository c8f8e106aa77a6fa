/*!
 *  Copyright (c) 2026 by Contributors
 * \file cdtax/io_util.h
 * \brief File helpers. Every write goes through a temp file and a rename.
 */
#ifndef CDTAX_IO_UTIL_H_
#define CDTAX_IO_UTIL_H_

#include <filesystem>
#include <string>
#include <string_view>

namespace cdtax {

/*! \throws IoError when the file cannot be opened. */
std::string ReadFile(const std::filesystem::path& path);

/*! \brief Writes to `<path>.tmp.<pid>` then renames over path; creates parent directories. */
void WriteFileAtomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace cdtax

#endif  // CDTAX_IO_UTIL_H_
