#pragma once

#include <map>
#include <string>
#include <vector>

#include "evseg/network.hpp"
#include "evseg/tensor.hpp"

namespace evseg {

/// Checkpoint or other artifact does not match what was requested.
struct artifact_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct parse_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- PGM (binary P5; 16-bit samples are MSB-first per Netpbm) -------------

/// values in [0,1], written as round(65535 * v).
void write_pgm16(const std::string& path, int h, int w,
                 const std::vector<double>& values);
std::vector<double> read_pgm16(const std::string& path, int& h, int& w);

/// 8-bit label image, values in {0, ..., maxval}.
void write_pgm8(const std::string& path, int h, int w,
                const std::vector<int>& labels, int maxval);
std::vector<int> read_pgm8(const std::string& path, int& h, int& w);

// ---- raw float tensor: magic "EVSEG1", u32 ndim, u32 dims, f32 payload, LE -

void write_f32(const std::string& path, const Tensor& t);
Tensor read_f32(const std::string& path);

// ---- checkpoint: magic, config echo, tensors in declaration order ---------

void save_checkpoint(const std::string& path, const NetParams& params);
NetParams load_checkpoint(const std::string& path);

// ---- flat key=value config -------------------------------------------------

/// Lines of `section.key=value`; '#' starts a comment. parse_error carries
/// the offending line number.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> read_config_file(const std::string& path);

double cfg_double(const std::map<std::string, std::string>& cfg,
                  const std::string& key, double fallback);
int cfg_int(const std::map<std::string, std::string>& cfg,
            const std::string& key, int fallback);
bool cfg_bool(const std::map<std::string, std::string>& cfg,
              const std::string& key, bool fallback);
std::string cfg_str(const std::map<std::string, std::string>& cfg,
                    const std::string& key, const std::string& fallback);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace evseg
