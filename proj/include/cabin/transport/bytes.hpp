#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <thread>

#include "cabin/transport/socket.hpp"

namespace cabin::transport {

using ByteHandler = std::function<void(std::span<const std::uint8_t>)>;

/// Push-style byte stream feeding a decoder (serial port, TCP, file).
class ByteSource {
public:
    virtual ~ByteSource() = default;
    /// Throws TransportError when the underlying device cannot be opened.
    virtual void start(ByteHandler on_bytes) = 0;
    virtual void stop() = 0;
};

class ByteSink {
public:
    virtual ~ByteSink() = default;
    /// Throws TransportError when nobody is reading.
    virtual void write(std::span<const std::uint8_t> bytes) = 0;
};

/// Synchronous pipe: write() runs the reader's handler on the caller's thread.
class InProcessPipe final : public ByteSource, public ByteSink {
public:
    void start(ByteHandler on_bytes) override;
    void stop() override;
    void write(std::span<const std::uint8_t> bytes) override;
    bool connected() const;

private:
    mutable std::mutex mutex_;
    ByteHandler handler_;
};

/// Accepts TCP connections and forwards their bytes; one connection at a time.
class TcpListenSource final : public ByteSource {
public:
    explicit TcpListenSource(Endpoint bind);
    ~TcpListenSource() override;
    void start(ByteHandler on_bytes) override;
    void stop() override;
    /// Actual port (useful when binding port 0).
    std::uint16_t port() const noexcept { return port_; }

private:
    void run();

    Endpoint bind_;
    Fd listener_;
    std::uint16_t port_ = 0;
    ByteHandler handler_;
    std::atomic<bool> stop_{false};
    std::thread thread_;
};

class TcpSink final : public ByteSink {
public:
    /// Throws TransportError on connection failure.
    explicit TcpSink(const Endpoint& peer);
    void write(std::span<const std::uint8_t> bytes) override;

private:
    Fd fd_;
};

/// Reads a byte dump, optionally pacing chunk_bytes every pace_ms.
class FileSource final : public ByteSource {
public:
    FileSource(std::string path, std::size_t chunk_bytes = 4096, int pace_ms = 0);
    ~FileSource() override;
    void start(ByteHandler on_bytes) override;
    void stop() override;
    /// Blocks until the whole file has been delivered or stop() was called.
    void wait();

private:
    std::string path_;
    std::size_t chunk_bytes_;
    int pace_ms_;
    std::atomic<bool> stop_{false};
    std::thread thread_;
};

/// Serial device in raw 8N1 mode. Non-tty paths (FIFOs) are read as-is.
class SerialSource final : public ByteSource {
public:
    SerialSource(std::string path, int baud = 115200);
    ~SerialSource() override;
    void start(ByteHandler on_bytes) override;
    void stop() override;

private:
    std::string path_;
    int baud_;
    Fd fd_;
    std::atomic<bool> stop_{false};
    std::thread thread_;
};

} // namespace cabin::transport
