package sys

import (
	"syscall"
	"unsafe"
)

type winsize struct {
	rows uint16
	cols uint16
}

func getSize(fd uintptr) (winsize, error) {
	var ws winsize
	_, _, errno := syscall.Syscall(syscall.SYS_IOCTL, fd, uintptr(syscall.TIOCGWINSZ), uintptr(unsafe.Pointer(&ws)))
	if errno != 0 {
		return ws, errno
	}
	return ws, nil
}

func write(fd int, p []byte) int {
	n, _, _ := syscall.Syscall(syscall.SYS_WRITE, uintptr(fd), uintptr(unsafe.Pointer(&p[0])), uintptr(len(p)))
	return int(n)
}
