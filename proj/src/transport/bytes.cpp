#include "cabin/transport/bytes.hpp"

#include <array>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include <fcntl.h>
#include <termios.h>
#include <unistd.h>

#include "cabin/core/errors.hpp"

namespace cabin::transport {

void InProcessPipe::start(ByteHandler on_bytes) {
    std::lock_guard lock(mutex_);
    handler_ = std::move(on_bytes);
}

void InProcessPipe::stop() {
    std::lock_guard lock(mutex_);
    handler_ = nullptr;
}

bool InProcessPipe::connected() const {
    std::lock_guard lock(mutex_);
    return static_cast<bool>(handler_);
}

void InProcessPipe::write(std::span<const std::uint8_t> bytes) {
    ByteHandler h;
    {
        std::lock_guard lock(mutex_);
        h = handler_;
    }
    if (!h) throw TransportError("in-process pipe has no reader");
    h(bytes);
}

TcpListenSource::TcpListenSource(Endpoint bind) : bind_(std::move(bind)) {
    listener_ = tcp_listen(bind_, &port_);
}

TcpListenSource::~TcpListenSource() { stop(); }

void TcpListenSource::start(ByteHandler on_bytes) {
    if (thread_.joinable()) throw StateError("TCP source already started");
    handler_ = std::move(on_bytes);
    stop_ = false;
    thread_ = std::thread([this] { run(); });
}

void TcpListenSource::stop() {
    stop_ = true;
    if (thread_.joinable()) thread_.join();
}

void TcpListenSource::run() {
    std::array<std::uint8_t, 4096> buf{};
    while (!stop_) {
        Fd conn = tcp_accept(listener_, 100);
        if (!conn.valid()) continue;
        while (!stop_) {
            const long n = recv_some(conn, buf, 100);
            if (n < 0) break;
            if (n > 0) handler_(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)));
        }
    }
}

TcpSink::TcpSink(const Endpoint& peer) : fd_(tcp_connect(peer)) {}

void TcpSink::write(std::span<const std::uint8_t> bytes) { send_all(fd_, bytes); }

FileSource::FileSource(std::string path, std::size_t chunk_bytes, int pace_ms)
    : path_(std::move(path)), chunk_bytes_(chunk_bytes == 0 ? 4096 : chunk_bytes), pace_ms_(pace_ms) {}

FileSource::~FileSource() { stop(); }

void FileSource::start(ByteHandler on_bytes) {
    if (thread_.joinable()) throw StateError("file source already started");
    auto in = std::make_shared<std::ifstream>(path_, std::ios::binary);
    if (!*in) throw TransportError("cannot open radar dump '" + path_ + "'");
    stop_ = false;
    thread_ = std::thread([this, in, on_bytes = std::move(on_bytes)] {
        std::vector<std::uint8_t> buf(chunk_bytes_);
        while (!stop_) {
            in->read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
            const auto n = static_cast<std::size_t>(in->gcount());
            if (n == 0) break;
            on_bytes(std::span<const std::uint8_t>(buf.data(), n));
            if (pace_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(pace_ms_));
        }
    });
}

void FileSource::wait() {
    if (thread_.joinable()) thread_.join();
}

void FileSource::stop() {
    stop_ = true;
    wait();
}

namespace {

speed_t baud_constant(int baud) {
    switch (baud) {
    case 9600: return B9600;
    case 19200: return B19200;
    case 38400: return B38400;
    case 57600: return B57600;
    case 115200: return B115200;
    case 230400: return B230400;
    case 460800: return B460800;
    case 921600: return B921600;
    default: throw ConfigError("unsupported baud rate " + std::to_string(baud));
    }
}

} // namespace

SerialSource::SerialSource(std::string path, int baud) : path_(std::move(path)), baud_(baud) {
    baud_constant(baud_);
}

SerialSource::~SerialSource() { stop(); }

void SerialSource::start(ByteHandler on_bytes) {
    if (thread_.joinable()) throw StateError("serial source already started");
    fd_.reset(::open(path_.c_str(), O_RDONLY | O_NOCTTY | O_NONBLOCK | O_CLOEXEC));
    if (!fd_.valid()) throw TransportError("cannot open serial device '" + path_ + "': " + std::strerror(errno));
    if (::isatty(fd_.get())) {
        termios tio{};
        if (::tcgetattr(fd_.get(), &tio) != 0) throw TransportError("tcgetattr failed on '" + path_ + "'");
        ::cfmakeraw(&tio);
        tio.c_cflag |= CLOCAL | CREAD;
        tio.c_cflag &= ~(CSTOPB | PARENB);
        ::cfsetispeed(&tio, baud_constant(baud_));
        ::cfsetospeed(&tio, baud_constant(baud_));
        if (::tcsetattr(fd_.get(), TCSANOW, &tio) != 0) throw TransportError("tcsetattr failed on '" + path_ + "'");
    }
    stop_ = false;
    thread_ = std::thread([this, on_bytes = std::move(on_bytes)] {
        std::array<std::uint8_t, 1024> buf{};
        while (!stop_) {
            const long n = recv_some(fd_, buf, 100);
            if (n < 0) {
                // A FIFO reports EOF while no writer is attached; keep waiting.
                std::this_thread::sleep_for(std::chrono::milliseconds(20));
                continue;
            }
            if (n > 0) on_bytes(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)));
        }
    });
}

void SerialSource::stop() {
    stop_ = true;
    if (thread_.joinable()) thread_.join();
    fd_.reset();
}

} // namespace cabin::transport
