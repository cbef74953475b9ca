#include <fcntl.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fieldline/backend.hpp"
#include "fieldline/png_io.hpp"

namespace fieldline {

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        std::string tmpl = (fs::temp_directory_path() / "fieldline-XXXXXX").string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (!mkdtemp(buf.data()))
            throw Error(ErrorCode::Io, "cannot create temp directory");
        path = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

// Runs argv with stderr captured; returns exit status (-1 on spawn failure).
int run_process(const std::vector<std::string>& argv, const fs::path& stderr_path) {
    std::vector<char*> cargv;
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);

    const pid_t pid = fork();
    if (pid < 0) return -1;
    if (pid == 0) {
        const int fd = open(stderr_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (fd >= 0) {
            dup2(fd, STDERR_FILENO);
            close(fd);
        }
        const int devnull = open("/dev/null", O_WRONLY);
        if (devnull >= 0) {
            dup2(devnull, STDOUT_FILENO);
            close(devnull);
        }
        execvp(cargv[0], cargv.data());
        _exit(127);
    }
    int status = 0;
    if (waitpid(pid, &status, 0) < 0) return -1;
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

DetectionSet external_segment(const RasterPatch& patch, const std::vector<std::string>& command) {
    patch.validate();
    if (command.empty())
        throw Error(ErrorCode::Config, "external backend command is empty");

    TempDir dir;
    const fs::path input = dir.path / "patch.png";
    const fs::path output = dir.path / "patch.rlej";
    const fs::path stderr_file = dir.path / "stderr.txt";
    write_raster(patch, input.string());

    std::vector<std::string> argv = command;
    argv.push_back("--input");
    argv.push_back(input.string());
    argv.push_back("--output");
    argv.push_back(output.string());

    const int status = run_process(argv, stderr_file);
    if (status != 0) {
        std::string err = slurp(stderr_file);
        while (!err.empty() && (err.back() == '\n' || err.back() == '\r')) err.pop_back();
        throw Error(ErrorCode::Backend,
                    command[0] + " exited " + std::to_string(status) +
                        (err.empty() ? "" : ": " + err));
    }
    if (!fs::exists(output))
        throw Error(ErrorCode::Protocol, command[0] + " wrote no output file");

    RleFile file;
    try {
        file = rlej_read(output.string());
    } catch (const Error& e) {
        throw Error(ErrorCode::Protocol, "invalid backend output: " + e.detail());
    }
    if (file.width != patch.width || file.height != patch.height)
        throw Error(ErrorCode::Protocol,
                    "dimension mismatch: backend wrote " + std::to_string(file.width) + "x" +
                        std::to_string(file.height) + " for a " + std::to_string(patch.width) +
                        "x" + std::to_string(patch.height) + " patch");
    try {
        return from_rle_file(file, /*require_scores=*/false);
    } catch (const Error& e) {
        throw Error(ErrorCode::Protocol, "invalid backend output: " + e.detail());
    }
}

ExternalBackend::ExternalBackend(std::vector<std::string> command)
    : command_(std::move(command)) {
    if (command_.empty())
        throw Error(ErrorCode::Config, "external backend command is empty");
}

DetectionSet ExternalBackend::segment(const RasterPatch& patch) const {
    return external_segment(patch, command_);
}

}  // namespace fieldline
